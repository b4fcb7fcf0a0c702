#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossway/episodes.hpp"
#include "crossway/nets.hpp"
#include "crossway/observe.hpp"
#include "crossway/rng.hpp"
#include "crossway/world.hpp"

namespace crossway {

struct Transition {
  ObservationSet obs;
  Action action = Action::Stop;
  double reward = 0.0;
  ObservationSet next_obs;  // pre-step observation again on terminal steps (never read)
  bool done = false;
  double beta = 0.0;
};

// Fixed-capacity FIFO ring. Uniform sampling with replacement from a caller
// supplied stream keeps every training run replayable.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 200000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return cap_; }

  // index 0 is the oldest live transition
  const Transition& at(std::size_t i) const;

  // batch uniform draws (with replacement); throws std::invalid_argument
  // when the buffer holds fewer than `batch` transitions.
  std::vector<const Transition*> sample(int batch, Rng& rng) const;

 private:
  std::size_t cap_;
  std::size_t next_ = 0;  // slot the next push overwrites once full
  std::vector<Transition> items_;
};

struct TrainConfig {
  double gamma = 0.99;
  int batch_size = 128;
  double lr = 2e-5;
  int lag_period = 100;    // gradient steps between lagged-copy updates
  double lag_tau = 0.2;
  double grad_clip = 10.0;
  double epsilon_floor = 0.01;
  int epsilon_horizon = 500;  // env steps to anneal over
  std::size_t replay_capacity = 200000;
  int episodes = 0;    // 0 -> one pass over the provided training split
  int val_period = 50; // episodes between validation passes
  uint64_t seed = 1;
};

// Exploration probability after t environment steps:
// floor^(min(t, horizon) / horizon); 1.0 at t = 0, floor from t = horizon on.
double epsilon_at(int env_step, const TrainConfig& cfg);

// Clipped double-Q target arithmetic: r when done, else
// r + gamma * min( lagged-head-1 at argmax of current head 2,
//                  lagged-head-2 at argmax of current head 1 ),
// with argmax ties resolved to action 0 (Stop). `current` and `lagged` must
// both carry both heads, evaluated at the successor observation.
double td_target_from_values(double r, bool done, double gamma, const QValues& current,
                             const QValues& lagged);

// Network-level form: evaluates both parameter copies at next_obs.
double td_target(double r, const ObservationSet& next_obs, bool done, double beta,
                 const ArchSpec& spec, const Parameters& params, const Parameters& lagged,
                 double gamma);

// Batch TD loss on `tape`: mean over the batch of the squared TD errors of
// both heads. Targets are evaluated outside the tape and enter as constants,
// so no gradient flows through them. Returns the 1x1 loss node.
Tape::Ref td_loss(Tape& tape, const ParamRefs& prefs, const ArchSpec& spec,
                  const std::vector<const Transition*>& batch, const Parameters& params,
                  const Parameters& lagged, double gamma);

// Greedy policy: argmax over actions of the mean of the two heads; exact tie
// resolves to Stop.
Action eval_action(const ArchSpec& spec, const Parameters& params, const ObservationSet& obs,
                   double beta);

// Epsilon-greedy wrapper around eval_action. Draws the explore coin first and
// the uniform action second, so stream consumption is reproducible.
Action behavior_action(const ArchSpec& spec, const Parameters& params,
                       const ObservationSet& obs, double beta, int env_step,
                       const TrainConfig& cfg, Rng& rng);

struct ValidationStats {
  double success = 0.0;    // percent of episodes
  double collision = 0.0;
  double timeout = 0.0;
  double mean_return = 0.0;
};

// Greedy rollouts over a fixed episode list: ego follows eval_action with the
// spec's own ego beta, everyone else follows the rule-based yielding planner.
ValidationStats validate(const LaneGraph& map, const ArchSpec& spec, const Parameters& params,
                         const std::vector<const EpisodeSpec*>& episodes,
                         const SimParams& p = {});

struct CurveRow {
  int episode = 0;     // 0 is the untrained-checkpoint validation row
  long env_steps = 0;  // cumulative
  double mean_reward = 0.0;  // trailing mean episodic return (window 50)
  double loss = 0.0;         // mean batch loss over this episode's gradient steps
  bool has_train_cols = false;
  std::optional<ValidationStats> val;
};

struct TrainResult {
  Checkpoint untrained;
  // Best validation snapshot of the run: higher success wins, mean return
  // breaks ties, earliest on full ties. A run that never improves on the
  // untrained validation returns the untrained parameters here.
  Checkpoint trained;
  std::vector<CurveRow> curve;
  ValidationStats untrained_val;
  ValidationStats trained_val;  // validation stats of the delivered checkpoint
};

// Off-policy training loop: per episode, act with behavior_action (ego beta
// redrawn uniform in [-1, 1] each episode, other agents on the yielding
// planner), store transitions, then take one gradient step per elapsed env
// step (skipped until the buffer holds a full batch). Deterministic in
// (config.seed, inputs).
// on_row, when set, observes every learning-curve row as it is appended
// (progress reporting; it must not mutate shared state the loop reads).
TrainResult train(const LaneGraph& map, const ArchSpec& arch, const TrainConfig& cfg,
                  const std::vector<const EpisodeSpec*>& train_eps,
                  const std::vector<const EpisodeSpec*>& val_eps, const SimParams& p = {},
                  const std::function<void(const CurveRow&)>& on_row = {});

// Learning-curve CSV: header episode,env_steps,mean_reward,loss,
// val_success,val_collision,val_timeout; training columns blank on the
// untrained row, validation columns blank between validation passes.
void write_curve_csv(const TrainResult& result, const std::string& path);

}  // namespace crossway
