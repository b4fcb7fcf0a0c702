#include "crossway/nets.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "crossway/rng.hpp"

namespace crossway {

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::MLP: return "mlp";
    case ArchKind::DeepSet: return "deepset";
    case ArchKind::SocialAttention: return "socialattn";
    case ArchKind::MIDAS: return "midas";
  }
  throw std::invalid_argument("unknown ArchKind");
}

ArchKind arch_kind_from_string(const std::string& name) {
  if (name == "mlp") return ArchKind::MLP;
  if (name == "deepset") return ArchKind::DeepSet;
  if (name == "socialattn") return ArchKind::SocialAttention;
  if (name == "midas") return ArchKind::MIDAS;
  throw std::invalid_argument("unknown architecture: " + name);
}

void Parameters::add(const std::string& name, Tensor t) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  items.emplace_back(name, std::move(t));
}

Tensor& Parameters::get(const std::string& name) {
  Tensor* t = find(name);
  if (t == nullptr) throw std::out_of_range("no parameter named " + name);
  return *t;
}

const Tensor& Parameters::get(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return t;
  throw std::out_of_range("no parameter named " + name);
}

Tensor* Parameters::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

std::size_t Parameters::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items) n += t.size();
  return n;
}

namespace {

// Hidden widths and head counts fixed per architecture family.
constexpr int kWideDim = 128;
constexpr int kNarrowDim = 64;
constexpr int kSetHeads = 4;
constexpr int kEgoHeads = 2;
constexpr int kInduced = 32;
constexpr int kSeeds = 2;
constexpr int kActions = 2;

struct ParamBuilder {
  Parameters p;
  Rng rng;

  explicit ParamBuilder(uint64_t seed) : rng(seed) {}

  Tensor uniform_tensor(int r, int c, double bound) {
    Tensor t(r, c);
    for (auto& x : t.v) x = rng.uniform(-bound, bound);
    return t;
  }

  void dense(const std::string& prefix, int in, int out) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    p.add(prefix + ".w", uniform_tensor(in, out, bound));
    p.add(prefix + ".b", uniform_tensor(1, out, bound));
  }

  void norm(const std::string& prefix, int dim) {
    Tensor g(1, dim);
    for (auto& x : g.v) x = 1.0;
    p.add(prefix + ".g", std::move(g));
    p.add(prefix + ".b", Tensor(1, dim));
  }

  // Learned query seeds (inducing points / pooling seeds), Glorot-uniform.
  void seeds(const std::string& name, int rows, int dim) {
    double bound = std::sqrt(6.0 / (rows + dim));
    p.add(name, uniform_tensor(rows, dim, bound));
  }

  void mab(const std::string& prefix, int dim_q, int dim_kv, int dim_v) {
    dense(prefix + ".fc_q", dim_q, dim_v);
    dense(prefix + ".fc_k", dim_kv, dim_v);
    dense(prefix + ".fc_v", dim_kv, dim_v);
    norm(prefix + ".ln0", dim_v);
    dense(prefix + ".fc_o", dim_v, dim_v);
    norm(prefix + ".ln1", dim_v);
  }

  void isab(const std::string& prefix, int dim_in, int dim_out, int induced) {
    seeds(prefix + ".I", induced, dim_out);
    mab(prefix + ".mab0", dim_out, dim_in, dim_out);
    mab(prefix + ".mab1", dim_in, dim_out, dim_out);
  }
};

}  // namespace

Parameters init_parameters(const ArchSpec& spec, uint64_t seed) {
  ParamBuilder b(seed);
  const int row_dim = spec.per_agent_dim;
  switch (spec.kind) {
    case ArchKind::MLP:
      b.dense("obs_enc.L0", spec.flat_dim(), kWideDim);
      b.dense("obs_enc.L1", kWideDim, kWideDim);
      b.dense("beta_enc.L0", 1, kNarrowDim);
      b.dense("beta_enc.L1", kNarrowDim, kWideDim);
      b.dense("q1.L0", kWideDim, kWideDim);
      b.dense("q1.L1", kWideDim, kActions);
      b.dense("q2.L0", kWideDim, kWideDim);
      b.dense("q2.L1", kWideDim, kActions);
      break;
    case ArchKind::DeepSet:
      b.dense("obs_enc.L0", row_dim, kWideDim);
      b.dense("obs_enc.L1", kWideDim, kNarrowDim);
      b.dense("obs_enc.L2", kNarrowDim, kWideDim);
      b.dense("beta_enc.L0", 1, kNarrowDim);
      b.dense("beta_enc.L1", kNarrowDim, kWideDim);
      b.dense("inter.L0", kWideDim, kWideDim);
      b.dense("inter.L1", kWideDim, kWideDim);
      b.dense("q1.L0", kWideDim, kWideDim);
      b.dense("q1.L1", kWideDim, kActions);
      b.dense("q2.L0", kWideDim, kWideDim);
      b.dense("q2.L1", kWideDim, kActions);
      break;
    case ArchKind::SocialAttention:
      b.dense("obs_enc.L0", row_dim, kNarrowDim);
      b.dense("obs_enc.L1", kNarrowDim, kNarrowDim);
      b.dense("obs_enc.L2", kNarrowDim, kNarrowDim);
      b.dense("beta_enc.L0", 1, kNarrowDim);
      b.dense("beta_enc.L1", kNarrowDim, kNarrowDim);
      b.dense("beta_enc.L2", kNarrowDim, kNarrowDim);
      b.dense("inter.L0", kNarrowDim, kNarrowDim);
      b.dense("inter.L1", kNarrowDim, kNarrowDim);
      b.dense("ego_attn.fc_q", kNarrowDim, kNarrowDim);
      b.dense("ego_attn.fc_k", kNarrowDim, kNarrowDim);
      b.dense("ego_attn.fc_v", kNarrowDim, kNarrowDim);
      b.dense("ego_attn.fc_o", kNarrowDim, kNarrowDim);
      b.dense("q1.L0", kNarrowDim, kNarrowDim);
      b.dense("q1.L1", kNarrowDim, kActions);
      b.dense("q2.L0", kNarrowDim, kNarrowDim);
      b.dense("q2.L1", kNarrowDim, kActions);
      break;
    case ArchKind::MIDAS:
      b.isab("obs_enc.isab0", row_dim, kWideDim, kInduced);
      b.isab("obs_enc.isab1", kWideDim, kWideDim, kInduced);
      b.dense("beta_enc.L0", 1, kNarrowDim);
      b.dense("beta_enc.L1", kNarrowDim, kWideDim);
      b.dense("beta_enc.L2", kWideDim, kWideDim);
      for (const char* head : {"q1", "q2"}) {
        std::string h(head);
        b.seeds(h + ".pma.S", kSeeds, kWideDim);
        b.mab(h + ".pma.mab", kWideDim, kWideDim, kWideDim);
        b.mab(h + ".sab0.mab", kWideDim, kWideDim, kWideDim);
        b.mab(h + ".sab1.mab", kWideDim, kWideDim, kWideDim);
        b.dense(h + ".out", kWideDim, 1);
      }
      break;
  }
  return std::move(b.p);
}

ParamRefs register_params(Tape& tape, const Parameters& params) {
  ParamRefs out;
  out.refs.reserve(params.items.size());
  for (const auto& [name, t] : params.items) out.refs.emplace_back(name, tape.input(t));
  return out;
}

Tape::Ref ParamRefs::of(const std::string& name) const {
  for (const auto& [n, r] : refs)
    if (n == name) return r;
  throw std::out_of_range("no registered parameter named " + name);
}

namespace {

// Emits graph nodes for the shared layer patterns. Parameter lookups go
// through a name index built once per graph.
struct GraphBuilder {
  Tape& t;
  std::unordered_map<std::string, Tape::Ref> index;

  GraphBuilder(Tape& tape, const ParamRefs& prefs) : t(tape) {
    index.reserve(prefs.refs.size() * 2);
    for (const auto& [n, r] : prefs.refs) index.emplace(n, r);
  }

  Tape::Ref of(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::out_of_range("no registered parameter named " + name);
    return it->second;
  }

  Tape::Ref dense(Tape::Ref x, const std::string& prefix) {
    return t.add_rowvec(t.matmul(x, of(prefix + ".w")), of(prefix + ".b"));
  }

  // linear -> ReLU -> linear -> ... -> linear over layers L0..L(n-1)
  Tape::Ref dense_chain(Tape::Ref x, const std::string& prefix, int layers) {
    for (int i = 0; i < layers; ++i) {
      x = dense(x, prefix + ".L" + std::to_string(i));
      if (i + 1 < layers) x = t.relu(x);
    }
    return x;
  }

  Tape::Ref multihead(Tape::Ref q, Tape::Ref k, Tape::Ref v, int heads, double scale) {
    int dim = t.value(q).c;
    int d = dim / heads;
    std::vector<Tape::Ref> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Tape::Ref qh = t.col_slice(q, h * d, (h + 1) * d);
      Tape::Ref kh = t.col_slice(k, h * d, (h + 1) * d);
      Tape::Ref vh = t.col_slice(v, h * d, (h + 1) * d);
      Tape::Ref attn = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), scale));
      outs.push_back(t.matmul(attn, vh));
    }
    return t.concat_cols(outs);
  }

  // Attention block with projected-query residual, post-norm, and a
  // ReLU feed-forward residual; attention scores scale by 1/sqrt(full dim).
  Tape::Ref mab(Tape::Ref query, Tape::Ref keys, const std::string& prefix, int dim_v,
                int heads) {
    Tape::Ref q = dense(query, prefix + ".fc_q");
    Tape::Ref k = dense(keys, prefix + ".fc_k");
    Tape::Ref v = dense(keys, prefix + ".fc_v");
    Tape::Ref o = t.add(q, multihead(q, k, v, heads, 1.0 / std::sqrt(dim_v)));
    o = t.layer_norm(o, of(prefix + ".ln0.g"), of(prefix + ".ln0.b"));
    o = t.add(o, t.relu(dense(o, prefix + ".fc_o")));
    return t.layer_norm(o, of(prefix + ".ln1.g"), of(prefix + ".ln1.b"));
  }

  Tape::Ref isab(Tape::Ref x, const std::string& prefix, int dim_out, int heads) {
    Tape::Ref hidden = mab(of(prefix + ".I"), x, prefix + ".mab0", dim_out, heads);
    return mab(x, hidden, prefix + ".mab1", dim_out, heads);
  }

  // Query the set from the ego row; per-head softmax over all rows, heads
  // concatenated and projected (no residual). Scores scale by 1/sqrt(d_head).
  Tape::Ref ego_attention(Tape::Ref x, const std::string& prefix, int heads) {
    Tape::Ref q = dense(t.row_slice(x, 0, 1), prefix + ".fc_q");
    Tape::Ref k = dense(x, prefix + ".fc_k");
    Tape::Ref v = dense(x, prefix + ".fc_v");
    int d = t.value(q).c / heads;
    Tape::Ref merged = multihead(q, k, v, heads, 1.0 / std::sqrt(d));
    return t.add_rowvec(t.matmul(merged, of(prefix + ".fc_o.w")), of(prefix + ".fc_o.b"));
  }

  Tape::Ref q_head_dense(Tape::Ref z, const std::string& prefix) {
    return dense(t.relu(dense(z, prefix + ".L0")), prefix + ".L1");
  }

  Tape::Ref q_head_pooled(Tape::Ref x, const std::string& prefix, int heads) {
    Tape::Ref pooled = mab(of(prefix + ".pma.S"), x, prefix + ".pma.mab", kWideDim, heads);
    pooled = mab(pooled, pooled, prefix + ".sab0.mab", kWideDim, heads);
    pooled = mab(pooled, pooled, prefix + ".sab1.mab", kWideDim, heads);
    // one [dim,1] linear per seed row; seed k scores action k
    return t.transpose(dense(pooled, prefix + ".out"));
  }
};

Tensor obs_rows_tensor(const ObservationSet& obs) {
  Tensor x(obs.rows, obs.dim);
  x.v = obs.data;
  return x;
}

}  // namespace

QRefs build_q(Tape& tape, const ArchSpec& spec, const ParamRefs& prefs,
              const ObservationSet& obs, double beta, QHead head) {
  if (beta < -1.0 || beta > 1.0) throw std::domain_error("beta outside [-1, 1]");
  if (obs.rows < 1) throw ShapeMismatch("observation has no rows");
  if (obs.dim != spec.per_agent_dim)
    throw ShapeMismatch("observation feature width " + std::to_string(obs.dim) +
                        " does not match architecture row width " +
                        std::to_string(spec.per_agent_dim));

  GraphBuilder g(tape, prefs);
  Tape::Ref beta_in = tape.input(Tensor::scalar(beta));

  const bool want1 = head == QHead::One || head == QHead::Both;
  const bool want2 = head == QHead::Two || head == QHead::Both;
  QRefs out;

  switch (spec.kind) {
    case ArchKind::MLP: {
      std::vector<double> flat;
      try {
        flat = pad_fixed(obs, spec.max_agents);
      } catch (const TooManyAgents& e) {
        throw ShapeMismatch(e.what());
      }
      Tensor x(1, spec.flat_dim());
      x.v = std::move(flat);
      Tape::Ref z = g.dense_chain(tape.input(std::move(x)), "obs_enc", 2);
      Tape::Ref be = g.dense_chain(beta_in, "beta_enc", 2);
      z = tape.add(z, be);
      if (want1) out.head1 = g.q_head_dense(z, "q1");
      if (want2) out.head2 = g.q_head_dense(z, "q2");
      break;
    }
    case ArchKind::DeepSet: {
      Tape::Ref x = g.dense_chain(tape.input(obs_rows_tensor(obs)), "obs_enc", 3);
      Tape::Ref be = g.dense_chain(beta_in, "beta_enc", 2);
      x = tape.add_to_row(x, 0, be);
      Tape::Ref z = g.dense_chain(tape.mean_rows(x), "inter", 2);
      if (want1) out.head1 = g.q_head_dense(z, "q1");
      if (want2) out.head2 = g.q_head_dense(z, "q2");
      break;
    }
    case ArchKind::SocialAttention: {
      Tape::Ref x = g.dense_chain(tape.input(obs_rows_tensor(obs)), "obs_enc", 3);
      Tape::Ref be = g.dense_chain(beta_in, "beta_enc", 3);
      x = tape.add_to_row(x, 0, be);
      x = g.dense_chain(x, "inter", 2);
      Tape::Ref z = g.ego_attention(x, "ego_attn", kEgoHeads);
      if (want1) out.head1 = g.q_head_dense(z, "q1");
      if (want2) out.head2 = g.q_head_dense(z, "q2");
      break;
    }
    case ArchKind::MIDAS: {
      Tape::Ref x = tape.input(obs_rows_tensor(obs));
      x = g.isab(x, "obs_enc.isab0", kWideDim, kSetHeads);
      x = g.isab(x, "obs_enc.isab1", kWideDim, kSetHeads);
      Tape::Ref be = g.dense_chain(beta_in, "beta_enc", 3);
      x = tape.add_to_row(x, 0, be);
      if (want1) out.head1 = g.q_head_pooled(x, "q1", kSetHeads);
      if (want2) out.head2 = g.q_head_pooled(x, "q2", kSetHeads);
      break;
    }
  }
  return out;
}

QValues forward_q(const ArchSpec& spec, const Parameters& params, const ObservationSet& obs,
                  double beta, QHead head) {
  Tape tape;
  ParamRefs prefs = register_params(tape, params);
  QRefs refs = build_q(tape, spec, prefs, obs, beta, head);
  QValues qv;
  if (refs.head1 >= 0) {
    const Tensor& q = tape.value(refs.head1);
    qv.head1 = {q.at(0, 0), q.at(0, 1)};
    qv.has_head1 = true;
  }
  if (refs.head2 >= 0) {
    const Tensor& q = tape.value(refs.head2);
    qv.head2 = {q.at(0, 0), q.at(0, 1)};
    qv.has_head2 = true;
  }
  return qv;
}

Parameters collect_grads(const Tape& tape, const ParamRefs& prefs) {
  Parameters grads;
  for (const auto& [name, ref] : prefs.refs) grads.add(name, tape.grad(ref));
  return grads;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.items.size() != params.items.size())
    throw ShapeMismatch("adam_step: gradient/parameter tensor counts differ");
  if (state.m.empty()) {
    for (const auto& [name, t] : params.items) {
      state.m.emplace_back(name, Tensor(t.r, t.c));
      state.v.emplace_back(name, Tensor(t.r, t.c));
    }
  }
  if (state.m.size() != params.items.size())
    throw ShapeMismatch("adam_step: optimizer state does not match parameters");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    auto& [pname, p] = params.items[i];
    const auto& [gname, g] = grads.items[i];
    auto& m = state.m[i].second;
    auto& v = state.v[i].second;
    if (pname != gname || !p.same_shape(g))
      throw ShapeMismatch("adam_step: mismatch at parameter " + pname);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m.v[k] = beta1 * m.v[k] + (1.0 - beta1) * g.v[k];
      v.v[k] = beta2 * v.v[k] + (1.0 - beta2) * g.v[k] * g.v[k];
      const double mhat = m.v[k] / bc1;
      const double vhat = v.v[k] / bc2;
      p.v[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double global_grad_norm(const Parameters& grads) {
  double ss = 0.0;
  for (const auto& [name, g] : grads.items)
    for (double x : g.v) ss += x * x;
  return std::sqrt(ss);
}

void clip_grad_norm(Parameters& grads, double max_norm) {
  const double norm = global_grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads.items)
    for (double& x : g.v) x *= s;
}

void polyak_update(Parameters& lagged, const Parameters& online, double tau) {
  if (lagged.items.size() != online.items.size())
    throw ShapeMismatch("polyak_update: tensor counts differ");
  for (std::size_t i = 0; i < lagged.items.size(); ++i) {
    auto& [lname, l] = lagged.items[i];
    const auto& [oname, o] = online.items[i];
    if (lname != oname || !l.same_shape(o))
      throw ShapeMismatch("polyak_update: mismatch at parameter " + lname);
    for (std::size_t k = 0; k < l.size(); ++k) l.v[k] = tau * o.v[k] + (1.0 - tau) * l.v[k];
  }
}

namespace {

constexpr char kCkptMagic[8] = {'C', 'W', 'Q', 'N', 'E', 'T', '0', '1'};

template <typename T>
void write_pod(std::ofstream& f, T x) {
  f.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T x{};
  f.read(reinterpret_cast<char*>(&x), sizeof(T));
  return x;
}

void write_string(std::ofstream& f, const std::string& s) {
  write_pod<uint32_t>(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& f) {
  uint32_t len = read_pod<uint32_t>(f);
  if (!f || len > (1u << 20)) throw std::runtime_error("checkpoint: corrupt string field");
  std::string s(len, '\0');
  f.read(s.data(), len);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(kCkptMagic, sizeof(kCkptMagic));
  write_string(f, to_string(ckpt.spec.kind));
  write_pod<int32_t>(f, ckpt.spec.per_agent_dim);
  write_pod<int32_t>(f, ckpt.spec.max_agents);
  write_pod<uint64_t>(f, ckpt.step);
  write_pod<uint64_t>(f, ckpt.params.items.size());
  for (const auto& [name, t] : ckpt.params.items) {
    write_string(f, name);
    write_pod<int32_t>(f, t.r);
    write_pod<int32_t>(f, t.c);
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || !std::equal(magic, magic + 8, kCkptMagic))
    throw std::runtime_error("not a checkpoint file: " + path);
  Checkpoint ckpt;
  ckpt.spec.kind = arch_kind_from_string(read_string(f));
  ckpt.spec.per_agent_dim = read_pod<int32_t>(f);
  ckpt.spec.max_agents = read_pod<int32_t>(f);
  ckpt.step = read_pod<uint64_t>(f);
  uint64_t count = read_pod<uint64_t>(f);
  if (!f || count > (1u << 20)) throw std::runtime_error("checkpoint: corrupt tensor count");
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(f);
    int32_t r = read_pod<int32_t>(f);
    int32_t c = read_pod<int32_t>(f);
    if (!f || r < 0 || c < 0 || static_cast<int64_t>(r) * c > (1 << 26))
      throw std::runtime_error("checkpoint: corrupt tensor header");
    Tensor t(r, c);
    f.read(reinterpret_cast<char*>(t.v.data()),
           static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated tensor data");
    ckpt.params.add(name, std::move(t));
  }
  return ckpt;
}

}  // namespace crossway
