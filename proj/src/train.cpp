#include "crossway/train.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <utility>

#include "crossway/planners.hpp"
#include "crossway/textio.hpp"

namespace crossway {

namespace {

constexpr int kWaypointSlots = 5;

int argmax_tie_low(const std::array<double, 2>& q) { return q[1] > q[0] ? 1 : 0; }

ObservationSet ego_view(const WorldState& w, const SimParams& p) {
  return encode(w, w.ego_id, p.obs_radius, kWaypointSlots);
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : cap_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < cap_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % cap_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("ReplayBuffer: index past size");
  if (items_.size() < cap_) return items_[i];  // not yet wrapped: insertion order
  return items_[(next_ + i) % cap_];
}

std::vector<const Transition*> ReplayBuffer::sample(int batch, Rng& rng) const {
  if (batch <= 0) throw std::invalid_argument("ReplayBuffer: batch must be positive");
  if (static_cast<std::size_t>(batch) > items_.size())
    throw std::invalid_argument("ReplayBuffer: batch exceeds stored transitions");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (int k = 0; k < batch; ++k)
    out.push_back(&items_[rng.uniform_int(0, static_cast<int>(items_.size()) - 1)]);
  return out;
}

double epsilon_at(int env_step, const TrainConfig& cfg) {
  if (env_step < 0) throw std::invalid_argument("epsilon_at: negative env step");
  const double frac =
      static_cast<double>(std::min(env_step, cfg.epsilon_horizon)) / cfg.epsilon_horizon;
  return std::pow(cfg.epsilon_floor, frac);
}

double td_target_from_values(double r, bool done, double gamma, const QValues& current,
                             const QValues& lagged) {
  if (done) return r;
  if (!current.has_head1 || !current.has_head2 || !lagged.has_head1 || !lagged.has_head2)
    throw std::invalid_argument("td_target: both heads of both copies are required");
  const int pick1 = argmax_tie_low(current.head2);  // lagged head 1 follows head 2's argmax
  const int pick2 = argmax_tie_low(current.head1);  // lagged head 2 follows head 1's argmax
  return r + gamma * std::min(lagged.head1[pick1], lagged.head2[pick2]);
}

double td_target(double r, const ObservationSet& next_obs, bool done, double beta,
                 const ArchSpec& spec, const Parameters& params, const Parameters& lagged,
                 double gamma) {
  if (done) return r;
  const QValues cur = forward_q(spec, params, next_obs, beta, QHead::Both);
  const QValues lag = forward_q(spec, lagged, next_obs, beta, QHead::Both);
  return td_target_from_values(r, done, gamma, cur, lag);
}

Tape::Ref td_loss(Tape& tape, const ParamRefs& prefs, const ArchSpec& spec,
                  const std::vector<const Transition*>& batch, const Parameters& params,
                  const Parameters& lagged, double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");

  // Targets on a scratch tape that registers both parameter copies once and
  // is truncated back between samples; same arithmetic as td_target.
  std::vector<double> targets(batch.size());
  {
    Tape scratch;
    const ParamRefs cur = register_params(scratch, params);
    const ParamRefs lag = register_params(scratch, lagged);
    const std::size_t base = scratch.node_count();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition* t = batch[i];
      if (t->done) {
        targets[i] = t->reward;
        continue;
      }
      scratch.truncate(base);
      const QRefs qc = build_q(scratch, spec, cur, t->next_obs, t->beta, QHead::Both);
      const QRefs ql = build_q(scratch, spec, lag, t->next_obs, t->beta, QHead::Both);
      QValues c, l;
      c.head1 = {scratch.value(qc.head1).v[0], scratch.value(qc.head1).v[1]};
      c.head2 = {scratch.value(qc.head2).v[0], scratch.value(qc.head2).v[1]};
      c.has_head1 = c.has_head2 = true;
      l.head1 = {scratch.value(ql.head1).v[0], scratch.value(ql.head1).v[1]};
      l.head2 = {scratch.value(ql.head2).v[0], scratch.value(ql.head2).v[1]};
      l.has_head1 = l.has_head2 = true;
      targets[i] = td_target_from_values(t->reward, false, gamma, c, l);
    }
  }

  Tape::Ref total = -1;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition* t = batch[i];
    Tensor target(1, 1);
    target.v[0] = targets[i];
    const Tape::Ref target_ref = tape.input(target);  // constant: grads never read
    const QRefs q = build_q(tape, spec, prefs, t->obs, t->beta, QHead::Both);
    const int a = static_cast<int>(t->action);
    for (const Tape::Ref head : {q.head1, q.head2}) {
      const Tape::Ref picked = tape.col_slice(head, a, a + 1);
      const Tape::Ref diff = tape.sub(picked, target_ref);
      const Tape::Ref sq = tape.mul(diff, diff);
      total = total < 0 ? sq : tape.add(total, sq);
    }
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.size()));
}

Action eval_action(const ArchSpec& spec, const Parameters& params, const ObservationSet& obs,
                   double beta) {
  const QValues q = forward_q(spec, params, obs, beta, QHead::Both);
  const double stop = 0.5 * (q.head1[0] + q.head2[0]);
  const double go = 0.5 * (q.head1[1] + q.head2[1]);
  return go > stop ? Action::Go : Action::Stop;
}

Action behavior_action(const ArchSpec& spec, const Parameters& params,
                       const ObservationSet& obs, double beta, int env_step,
                       const TrainConfig& cfg, Rng& rng) {
  const bool explore = rng.bernoulli(epsilon_at(env_step, cfg));
  if (explore) return rng.uniform_int(0, 1) == 0 ? Action::Stop : Action::Go;
  return eval_action(spec, params, obs, beta);
}

ValidationStats validate(const LaneGraph& map, const ArchSpec& spec, const Parameters& params,
                         const std::vector<const EpisodeSpec*>& episodes, const SimParams& p) {
  if (episodes.empty()) throw std::invalid_argument("validate: no episodes");
  const Policy others = make_oracle(OracleConfig{}, p);
  int success = 0, collision = 0, timeout = 0;
  double total_return = 0.0;
  for (const EpisodeSpec* e : episodes) {
    const WorldState w = make_world(map, *e, p);
    const double ego_beta = w.find(w.ego_id)->beta;
    const Policy ego = [&](const WorldState& s, int) {
      return eval_action(spec, params, ego_view(s, p), ego_beta);
    };
    const EpisodeResult res = run_episode(w, ego, others, p);
    switch (res.status) {
      case EpisodeStatus::Success:
        ++success;
        break;
      case EpisodeStatus::Collision:
        ++collision;
        break;
      case EpisodeStatus::Timeout:
        ++timeout;
        break;
      case EpisodeStatus::Running:
        throw std::logic_error("validate: episode did not terminate");
    }
    total_return += res.ego_return;
  }
  const double n = static_cast<double>(episodes.size());
  return {100.0 * success / n, 100.0 * collision / n, 100.0 * timeout / n, total_return / n};
}

TrainResult train(const LaneGraph& map, const ArchSpec& arch, const TrainConfig& cfg,
                  const std::vector<const EpisodeSpec*>& train_eps,
                  const std::vector<const EpisodeSpec*>& val_eps, const SimParams& p,
                  const std::function<void(const CurveRow&)>& on_row) {
  if (train_eps.empty() || val_eps.empty())
    throw std::invalid_argument("train: training and validation splits must be nonempty");
  if (cfg.batch_size <= 0 || cfg.lag_period <= 0 || cfg.epsilon_horizon <= 0 ||
      !(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw std::invalid_argument("train: bad config");

  Parameters params = init_parameters(arch, cfg.seed);
  Parameters lagged = params;
  AdamState adam;
  ReplayBuffer replay(cfg.replay_capacity);
  Rng beta_rng(mix_seed(cfg.seed, 0xB37A));
  Rng explore_rng(mix_seed(cfg.seed, 0xAC710));
  Rng sample_rng(mix_seed(cfg.seed, 0x5A3F1E));

  TrainResult out;
  out.untrained = Checkpoint{arch, params, 0};
  out.untrained_val = validate(map, arch, params, val_eps, p);
  // The delivered checkpoint is the best validation snapshot of the run:
  // higher success wins, mean return breaks ties, the earliest snapshot is
  // kept on full ties (so a run that never improves returns the untrained
  // parameters unchanged).
  out.trained = out.untrained;
  out.trained_val = out.untrained_val;
  const auto improves = [](const ValidationStats& cand, const ValidationStats& best) {
    if (cand.success != best.success) return cand.success > best.success;
    return cand.mean_return > best.mean_return;
  };
  {
    CurveRow row;
    row.episode = 0;
    row.env_steps = 0;
    row.has_train_cols = false;
    row.val = out.untrained_val;
    out.curve.push_back(row);
    if (on_row) on_row(row);
  }

  const Policy others = make_oracle(OracleConfig{}, p);
  const int n_episodes =
      cfg.episodes > 0 ? cfg.episodes : static_cast<int>(train_eps.size());
  long env_steps = 0;
  uint64_t grad_steps = 0;
  std::deque<double> recent_returns;

  for (int ep = 1; ep <= n_episodes; ++ep) {
    const EpisodeSpec& espec = *train_eps[(ep - 1) % train_eps.size()];
    WorldState w = make_world(map, espec, p);
    const double ego_beta = beta_rng.uniform(-1.0, 1.0);
    w.find(w.ego_id)->beta = ego_beta;

    double ep_return = 0.0;
    int ep_len = 0;
    while (w.status == EpisodeStatus::Running) {
      ObservationSet obs = ego_view(w, p);
      const Action a = behavior_action(arch, params, obs, ego_beta,
                                       static_cast<int>(env_steps), cfg, explore_rng);
      std::map<int, Action> actions;
      for (const AgentState& ag : w.agents)
        if (!ag.done) actions[ag.id] = ag.id == w.ego_id ? a : others(w, ag.id);
      WorldState next = step(w, actions, p);
      const StepEvents events = ego_events(w, next, p);
      const double r = ego_reward(ego_beta, events, p).total();
      const bool done = next.status != EpisodeStatus::Running;
      ObservationSet next_obs = done ? obs : ego_view(next, p);
      replay.push({std::move(obs), a, r, std::move(next_obs), done, ego_beta});
      ep_return += r;
      ++ep_len;
      ++env_steps;
      w = std::move(next);
    }

    double loss_sum = 0.0;
    int loss_count = 0;
    for (int g = 0; g < ep_len; ++g) {
      if (replay.size() < static_cast<std::size_t>(cfg.batch_size)) break;  // warm-up
      const auto batch = replay.sample(cfg.batch_size, sample_rng);
      Tape tape;
      const ParamRefs prefs = register_params(tape, params);
      const Tape::Ref loss = td_loss(tape, prefs, arch, batch, params, lagged, cfg.gamma);
      tape.backward(loss);
      Parameters grads = collect_grads(tape, prefs);
      clip_grad_norm(grads, cfg.grad_clip);
      adam_step(params, grads, adam, cfg.lr);
      ++grad_steps;
      if (grad_steps % static_cast<uint64_t>(cfg.lag_period) == 0)
        polyak_update(lagged, params, cfg.lag_tau);
      loss_sum += tape.value(loss).v[0];
      ++loss_count;
    }

    recent_returns.push_back(ep_return);
    if (recent_returns.size() > 50) recent_returns.pop_front();
    double mean_reward = 0.0;
    for (double v : recent_returns) mean_reward += v;
    mean_reward /= static_cast<double>(recent_returns.size());

    CurveRow row;
    row.episode = ep;
    row.env_steps = env_steps;
    row.mean_reward = mean_reward;
    row.loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    row.has_train_cols = true;
    if (ep % cfg.val_period == 0 || ep == n_episodes) {
      row.val = validate(map, arch, params, val_eps, p);
      if (improves(*row.val, out.trained_val)) {
        out.trained = Checkpoint{arch, params, grad_steps};
        out.trained_val = *row.val;
      }
    }
    out.curve.push_back(row);
    if (on_row) on_row(row);
  }
  return out;
}

void write_curve_csv(const TrainResult& result, const std::string& path) {
  CsvWriter csv(path);
  csv.row("episode", "env_steps", "mean_reward", "loss", "val_success", "val_collision",
          "val_timeout");
  for (const CurveRow& row : result.curve) {
    std::vector<std::string> cells;
    cells.push_back(std::to_string(row.episode));
    cells.push_back(std::to_string(row.env_steps));
    cells.push_back(row.has_train_cols ? fmt_double(row.mean_reward) : "");
    cells.push_back(row.has_train_cols ? fmt_double(row.loss) : "");
    if (row.val) {
      cells.push_back(fmt_double(row.val->success));
      cells.push_back(fmt_double(row.val->collision));
      cells.push_back(fmt_double(row.val->timeout));
    } else {
      cells.push_back("");
      cells.push_back("");
      cells.push_back("");
    }
    csv.row(cells);
  }
}

}  // namespace crossway
