#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crossway/observe.hpp"
#include "crossway/tensor.hpp"

namespace crossway {

enum class ArchKind { MLP, DeepSet, SocialAttention, MIDAS };

std::string to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& name);  // throws std::invalid_argument

// Value-network family. All four variants consume per-agent observation rows
// of `per_agent_dim` features; the MLP flattens `max_agents` padded rows into
// one vector, the set variants process rows directly.
struct ArchSpec {
  ArchKind kind = ArchKind::MLP;
  int per_agent_dim = 16;
  int max_agents = 8;

  int flat_dim() const { return per_agent_dim * max_agents; }
};

// Ordered collection of named tensors. Order is fixed at construction and is
// the canonical order for optimizer state and checkpoints.
struct Parameters {
  std::vector<std::pair<std::string, Tensor>> items;

  void add(const std::string& name, Tensor t);      // throws on duplicate name
  Tensor& get(const std::string& name);             // throws std::out_of_range
  const Tensor& get(const std::string& name) const; // throws std::out_of_range
  Tensor* find(const std::string& name);
  std::size_t tensor_count() const { return items.size(); }
  std::size_t value_count() const;
};

// Fresh parameters for one architecture instance (both q-heads included).
// Dense layers draw U(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and
// biases; learned query seeds draw Glorot-uniform; layer norms start at
// gain 1, bias 0. Deterministic in the seed.
Parameters init_parameters(const ArchSpec& spec, uint64_t seed);

enum class QHead { One = 1, Two = 2, Both = 3 };

struct QValues {
  std::array<double, 2> head1{};  // [Stop, Go]
  std::array<double, 2> head2{};
  bool has_head1 = false;
  bool has_head2 = false;
};

// Evaluate the q-network on one observation. Throws ShapeMismatch when the
// observation feature width does not match the spec (or the padded row count
// exceeds max_agents for the MLP), std::domain_error when beta is outside
// [-1, 1].
QValues forward_q(const ArchSpec& spec, const Parameters& params, const ObservationSet& obs,
                  double beta, QHead head = QHead::Both);

// --- graph-building API (shared by forward_q and the trainer) ---

// Parameters registered as leaves of one tape, in Parameters order.
struct ParamRefs {
  std::vector<std::pair<std::string, Tape::Ref>> refs;
  Tape::Ref of(const std::string& name) const;  // throws std::out_of_range
};

ParamRefs register_params(Tape& tape, const Parameters& params);

struct QRefs {
  Tape::Ref head1 = -1;  // 1x2 node or -1 when the head was not requested
  Tape::Ref head2 = -1;
};

QRefs build_q(Tape& tape, const ArchSpec& spec, const ParamRefs& prefs,
              const ObservationSet& obs, double beta, QHead head = QHead::Both);

// Gradients of every registered parameter after tape.backward(), shaped and
// ordered like the source Parameters.
Parameters collect_grads(const Tape& tape, const ParamRefs& prefs);

// --- optimizer ---

struct AdamState {
  uint64_t t = 0;
  std::vector<std::pair<std::string, Tensor>> m;
  std::vector<std::pair<std::string, Tensor>> v;
};

// Standard bias-corrected Adam. Moment buffers are created lazily on the
// first call and must align with `params` afterwards.
void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

double global_grad_norm(const Parameters& grads);

// Scales all gradients by max_norm/norm when the global norm exceeds max_norm.
void clip_grad_norm(Parameters& grads, double max_norm);

// lagged <- tau * online + (1 - tau) * lagged, elementwise.
void polyak_update(Parameters& lagged, const Parameters& online, double tau);

// --- checkpoints ---

struct Checkpoint {
  ArchSpec spec;
  Parameters params;
  uint64_t step = 0;
};

// Binary named-tensor archive; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // throws std::runtime_error

}  // namespace crossway
