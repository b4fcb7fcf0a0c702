#include "crossway/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace crossway {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap as_mat(const Tensor& t) { return CMap(t.v.data(), t.r, t.c); }
Map as_mat(Tensor& t) { return Map(t.v.data(), t.r, t.c); }

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw ShapeMismatch(std::string(op) + ": bad operand shape " + std::to_string(a.r) + "x" +
                      std::to_string(a.c));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + std::to_string(a.r) + "x" +
                      std::to_string(a.c) + " and " + std::to_string(b.r) + "x" +
                      std::to_string(b.c));
}

}  // namespace

Tape::Ref Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::input(Tensor value) {
  Node n;
  n.op = Op::Input;
  n.val = std::move(value);
  return push(std::move(n));
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.c != B.r) shape_error("matmul", A, B);
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.val = Tensor(A.r, B.c);
  as_mat(n.val).noalias() = as_mat(A) * as_mat(B);
  return push(std::move(n));
}

Tape::Ref Tape::matmul_nt(Ref a, Ref b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.c != B.c) shape_error("matmul_nt", A, B);
  Node n;
  n.op = Op::MatMulNT;
  n.a = a;
  n.b = b;
  n.val = Tensor(A.r, B.r);
  as_mat(n.val).noalias() = as_mat(A) * as_mat(B).transpose();
  return push(std::move(n));
}

Tape::Ref Tape::add(Ref a, Ref b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.val = Tensor(A.r, A.c);
  as_mat(n.val) = as_mat(A) + as_mat(B);
  return push(std::move(n));
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.val = Tensor(A.r, A.c);
  as_mat(n.val) = as_mat(A) - as_mat(B);
  return push(std::move(n));
}

Tape::Ref Tape::mul(Ref a, Ref b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.val = Tensor(A.r, A.c);
  as_mat(n.val) = as_mat(A).cwiseProduct(as_mat(B));
  return push(std::move(n));
}

Tape::Ref Tape::scale(Ref a, double k) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.k = k;
  n.val = Tensor(A.r, A.c);
  as_mat(n.val) = as_mat(A) * k;
  return push(std::move(n));
}

Tape::Ref Tape::add_rowvec(Ref a, Ref v) {
  const Tensor& A = nodes_[a].val;
  const Tensor& V = nodes_[v].val;
  if (V.r != 1 || V.c != A.c) shape_error("add_rowvec", A, V);
  Node n;
  n.op = Op::AddRowVec;
  n.a = a;
  n.b = v;
  n.val = Tensor(A.r, A.c);
  as_mat(n.val) = as_mat(A).rowwise() + as_mat(V).row(0);
  return push(std::move(n));
}

Tape::Ref Tape::add_to_row(Ref a, int row, Ref v) {
  const Tensor& A = nodes_[a].val;
  const Tensor& V = nodes_[v].val;
  if (V.r != 1 || V.c != A.c || row < 0 || row >= A.r) shape_error("add_to_row", A, V);
  Node n;
  n.op = Op::AddToRow;
  n.a = a;
  n.b = v;
  n.i0 = row;
  n.val = A;
  as_mat(n.val).row(row) += as_mat(V).row(0);
  return push(std::move(n));
}

Tape::Ref Tape::relu(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.val = Tensor(A.r, A.c);
  for (std::size_t i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] > 0.0 ? A.v[i] : 0.0;
  return push(std::move(n));
}

Tape::Ref Tape::logistic(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::Logistic;
  n.a = a;
  n.val = Tensor(A.r, A.c);
  for (std::size_t i = 0; i < A.size(); ++i) n.val.v[i] = 1.0 / (1.0 + std::exp(-A.v[i]));
  return push(std::move(n));
}

Tape::Ref Tape::softmax_rows(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a;
  n.val = Tensor(A.r, A.c);
  for (int i = 0; i < A.r; ++i) {
    double mx = A.at(i, 0);
    for (int j = 1; j < A.c; ++j) mx = std::max(mx, A.at(i, j));
    double z = 0.0;
    for (int j = 0; j < A.c; ++j) {
      double e = std::exp(A.at(i, j) - mx);
      n.val.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < A.c; ++j) n.val.at(i, j) /= z;
  }
  return push(std::move(n));
}

Tape::Ref Tape::layer_norm(Ref x, Ref gain, Ref bias, double eps) {
  const Tensor& X = nodes_[x].val;
  const Tensor& G = nodes_[gain].val;
  const Tensor& B = nodes_[bias].val;
  if (G.r != 1 || G.c != X.c) shape_error("layer_norm", X, G);
  if (B.r != 1 || B.c != X.c) shape_error("layer_norm", X, B);
  Node n;
  n.op = Op::LayerNorm;
  n.a = x;
  n.b = gain;
  n.c = bias;
  n.k = eps;
  n.val = Tensor(X.r, X.c);
  for (int i = 0; i < X.r; ++i) {
    double mean = 0.0;
    for (int j = 0; j < X.c; ++j) mean += X.at(i, j);
    mean /= X.c;
    double var = 0.0;
    for (int j = 0; j < X.c; ++j) {
      double d = X.at(i, j) - mean;
      var += d * d;
    }
    var /= X.c;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < X.c; ++j)
      n.val.at(i, j) = (X.at(i, j) - mean) * inv * G.at(0, j) + B.at(0, j);
  }
  return push(std::move(n));
}

Tape::Ref Tape::mean_rows(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::MeanRows;
  n.a = a;
  n.val = Tensor(1, A.c);
  as_mat(n.val).row(0) = as_mat(A).colwise().mean();
  return push(std::move(n));
}

Tape::Ref Tape::sum(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.val = Tensor::scalar(as_mat(A).sum());
  return push(std::move(n));
}

Tape::Ref Tape::row_slice(Ref a, int r0, int r1) {
  const Tensor& A = nodes_[a].val;
  if (r0 < 0 || r1 > A.r || r0 >= r1) shape_error("row_slice", A);
  Node n;
  n.op = Op::RowSlice;
  n.a = a;
  n.i0 = r0;
  n.i1 = r1;
  n.val = Tensor(r1 - r0, A.c);
  as_mat(n.val) = as_mat(A).middleRows(r0, r1 - r0);
  return push(std::move(n));
}

Tape::Ref Tape::col_slice(Ref a, int c0, int c1) {
  const Tensor& A = nodes_[a].val;
  if (c0 < 0 || c1 > A.c || c0 >= c1) shape_error("col_slice", A);
  Node n;
  n.op = Op::ColSlice;
  n.a = a;
  n.i0 = c0;
  n.i1 = c1;
  n.val = Tensor(A.r, c1 - c0);
  as_mat(n.val) = as_mat(A).middleCols(c0, c1 - c0);
  return push(std::move(n));
}

Tape::Ref Tape::concat_rows(const std::vector<Ref>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no operands");
  int cols = nodes_[parts[0]].val.c;
  int rows = 0;
  for (Ref p : parts) {
    if (nodes_[p].val.c != cols) shape_error("concat_rows", nodes_[p].val);
    rows += nodes_[p].val.r;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.list = parts;
  n.val = Tensor(rows, cols);
  int at = 0;
  for (Ref p : parts) {
    const Tensor& P = nodes_[p].val;
    as_mat(n.val).middleRows(at, P.r) = as_mat(P);
    at += P.r;
  }
  return push(std::move(n));
}

Tape::Ref Tape::concat_cols(const std::vector<Ref>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no operands");
  int rows = nodes_[parts[0]].val.r;
  int cols = 0;
  for (Ref p : parts) {
    if (nodes_[p].val.r != rows) shape_error("concat_cols", nodes_[p].val);
    cols += nodes_[p].val.c;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.list = parts;
  n.val = Tensor(rows, cols);
  int at = 0;
  for (Ref p : parts) {
    const Tensor& P = nodes_[p].val;
    as_mat(n.val).middleCols(at, P.c) = as_mat(P);
    at += P.c;
  }
  return push(std::move(n));
}

Tape::Ref Tape::transpose(Ref a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.val = Tensor(A.c, A.r);
  as_mat(n.val) = as_mat(A).transpose();
  return push(std::move(n));
}

void Tape::backward(Ref loss) {
  const Tensor& L = nodes_[loss].val;
  if (L.r != 1 || L.c != 1) shape_error("backward: loss must be 1x1", L);
  for (auto& n : nodes_) {
    n.grad = Tensor(n.val.r, n.val.c);
  }
  nodes_[loss].grad.v[0] = 1.0;
  for (Ref i = static_cast<Ref>(nodes_.size()) - 1; i >= 0; --i) backprop(nodes_[i]);
}

void Tape::backprop(Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Input:
      break;
    case Op::MatMul: {
      as_mat(nodes_[n.a].grad).noalias() += as_mat(g) * as_mat(nodes_[n.b].val).transpose();
      as_mat(nodes_[n.b].grad).noalias() += as_mat(nodes_[n.a].val).transpose() * as_mat(g);
      break;
    }
    case Op::MatMulNT: {
      as_mat(nodes_[n.a].grad).noalias() += as_mat(g) * as_mat(nodes_[n.b].val);
      as_mat(nodes_[n.b].grad).noalias() += as_mat(g).transpose() * as_mat(nodes_[n.a].val);
      break;
    }
    case Op::Add:
      as_mat(nodes_[n.a].grad) += as_mat(g);
      as_mat(nodes_[n.b].grad) += as_mat(g);
      break;
    case Op::Sub:
      as_mat(nodes_[n.a].grad) += as_mat(g);
      as_mat(nodes_[n.b].grad) -= as_mat(g);
      break;
    case Op::Mul:
      as_mat(nodes_[n.a].grad) += as_mat(g).cwiseProduct(as_mat(nodes_[n.b].val));
      as_mat(nodes_[n.b].grad) += as_mat(g).cwiseProduct(as_mat(nodes_[n.a].val));
      break;
    case Op::Scale:
      as_mat(nodes_[n.a].grad) += as_mat(g) * n.k;
      break;
    case Op::AddRowVec:
      as_mat(nodes_[n.a].grad) += as_mat(g);
      as_mat(nodes_[n.b].grad).row(0) += as_mat(g).colwise().sum();
      break;
    case Op::AddToRow:
      as_mat(nodes_[n.a].grad) += as_mat(g);
      as_mat(nodes_[n.b].grad).row(0) += as_mat(g).row(n.i0);
      break;
    case Op::Relu: {
      const Tensor& x = nodes_[n.a].val;
      Tensor& dx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x.v[i] > 0.0) dx.v[i] += g.v[i];
      break;
    }
    case Op::Logistic: {
      Tensor& dx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        double y = n.val.v[i];
        dx.v[i] += g.v[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::SoftmaxRows: {
      Tensor& dx = nodes_[n.a].grad;
      for (int i = 0; i < n.val.r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n.val.c; ++j) dot += g.at(i, j) * n.val.at(i, j);
        for (int j = 0; j < n.val.c; ++j)
          dx.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dot);
      }
      break;
    }
    case Op::LayerNorm: {
      const Tensor& X = nodes_[n.a].val;
      const Tensor& G = nodes_[n.b].val;
      Tensor& dX = nodes_[n.a].grad;
      Tensor& dG = nodes_[n.b].grad;
      Tensor& dB = nodes_[n.c].grad;
      int cols = X.c;
      for (int i = 0; i < X.r; ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += X.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
          double d = X.at(i, j) - mean;
          var += d * d;
        }
        var /= cols;
        double inv = 1.0 / std::sqrt(var + n.k);
        // dxh = upstream * gain; dx = inv * (dxh - mean(dxh) - xh * mean(dxh * xh))
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < cols; ++j) {
          double xh = (X.at(i, j) - mean) * inv;
          double dxh = g.at(i, j) * G.at(0, j);
          m1 += dxh;
          m2 += dxh * xh;
        }
        m1 /= cols;
        m2 /= cols;
        for (int j = 0; j < cols; ++j) {
          double xh = (X.at(i, j) - mean) * inv;
          double dxh = g.at(i, j) * G.at(0, j);
          dX.at(i, j) += inv * (dxh - m1 - xh * m2);
          dG.at(0, j) += g.at(i, j) * xh;
          dB.at(0, j) += g.at(i, j);
        }
      }
      break;
    }
    case Op::MeanRows: {
      double inv = 1.0 / nodes_[n.a].val.r;
      as_mat(nodes_[n.a].grad).rowwise() += as_mat(g).row(0) * inv;
      break;
    }
    case Op::Sum: {
      Tensor& dx = nodes_[n.a].grad;
      double gv = g.v[0];
      for (auto& d : dx.v) d += gv;
      break;
    }
    case Op::RowSlice:
      as_mat(nodes_[n.a].grad).middleRows(n.i0, n.i1 - n.i0) += as_mat(g);
      break;
    case Op::ColSlice:
      as_mat(nodes_[n.a].grad).middleCols(n.i0, n.i1 - n.i0) += as_mat(g);
      break;
    case Op::ConcatRows: {
      int at = 0;
      for (Ref p : n.list) {
        int pr = nodes_[p].val.r;
        as_mat(nodes_[p].grad) += as_mat(g).middleRows(at, pr);
        at += pr;
      }
      break;
    }
    case Op::ConcatCols: {
      int at = 0;
      for (Ref p : n.list) {
        int pc = nodes_[p].val.c;
        as_mat(nodes_[p].grad) += as_mat(g).middleCols(at, pc);
        at += pc;
      }
      break;
    }
    case Op::Transpose:
      as_mat(nodes_[n.a].grad) += as_mat(g).transpose();
      break;
  }
}

}  // namespace crossway
