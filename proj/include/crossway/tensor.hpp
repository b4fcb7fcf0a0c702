#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossway {

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of doubles. Vectors are 1 x n, scalars 1 x 1.
struct Tensor {
  int r = 0, c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int rows, int cols) : r(rows), c(cols), v(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }

  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * c + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * c + j]; }
  std::size_t size() const { return v.size(); }
  std::vector<int> shape() const { return {r, c}; }
  bool same_shape(const Tensor& o) const { return r == o.r && c == o.c; }
};

// Recorded computation graph with reverse-mode differentiation. Build the
// graph through the op methods (each returns a node index), call backward()
// on a scalar node, then read grad() of any node. Nodes are only valid for
// the lifetime of the tape that produced them.
class Tape {
 public:
  using Ref = int;

  Ref input(Tensor value);

  const Tensor& value(Ref n) const { return nodes_[n].val; }
  const Tensor& grad(Ref n) const { return nodes_[n].grad; }

  // c_ij = sum_k a_ik b_kj
  Ref matmul(Ref a, Ref b);
  // c_ij = sum_k a_ik b_jk  (a times b-transposed)
  Ref matmul_nt(Ref a, Ref b);
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);  // elementwise
  Ref scale(Ref a, double k);
  Ref add_rowvec(Ref a, Ref v);          // broadcast a 1 x n row over all rows
  Ref add_to_row(Ref a, int row, Ref v); // add a 1 x n row to one row only
  Ref relu(Ref a);
  Ref logistic(Ref a);
  Ref softmax_rows(Ref a);
  // y = (x - mean) / sqrt(var + eps) * gain + bias, per row; gain/bias 1 x n
  Ref layer_norm(Ref x, Ref gain, Ref bias, double eps = 1e-5);
  Ref mean_rows(Ref a);  // column means, result 1 x n
  Ref sum(Ref a);        // all entries, result 1 x 1
  Ref row_slice(Ref a, int r0, int r1);
  Ref col_slice(Ref a, int c0, int c1);
  Ref concat_rows(const std::vector<Ref>& parts);
  Ref concat_cols(const std::vector<Ref>& parts);
  Ref transpose(Ref a);

  // Reverse pass from a 1 x 1 loss node; fills grad() for every node.
  void backward(Ref loss);

  std::size_t node_count() const { return nodes_.size(); }

  // Drops every node at index >= keep, invalidating refs past that point.
  // Earlier nodes only reference still-earlier ones, so the survivors stay
  // valid; lets one tape with registered leaves be rebuilt cheaply per query.
  void truncate(std::size_t keep) {
    if (keep > nodes_.size()) throw ShapeMismatch("truncate: keep exceeds node count");
    nodes_.resize(keep);
  }

 private:
  enum class Op {
    Input, MatMul, MatMulNT, Add, Sub, Mul, Scale, AddRowVec, AddToRow,
    Relu, Logistic, SoftmaxRows, LayerNorm, MeanRows, Sum,
    RowSlice, ColSlice, ConcatRows, ConcatCols, Transpose,
  };

  struct Node {
    Tensor val;
    Tensor grad;
    Op op = Op::Input;
    Ref a = -1, b = -1, c = -1;
    std::vector<Ref> list;
    int i0 = 0, i1 = 0;
    double k = 0.0;
  };

  Ref push(Node n);
  void backprop(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace crossway
