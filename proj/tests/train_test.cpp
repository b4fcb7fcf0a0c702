#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crossway/train.hpp"

using namespace crossway;

namespace {

const LaneGraph& shared_map() {
  static const LaneGraph map = build_default_map();
  return map;
}

ObservationSet rand_obs(Rng& rng, int rows) {
  ObservationSet obs;
  obs.rows = rows;
  obs.dim = 16;
  obs.data.resize(static_cast<std::size_t>(rows) * 16);
  for (double& v : obs.data) v = rng.uniform(-1.0, 1.0);
  return obs;
}

QValues make_q(double s1, double g1, double s2, double g2) {
  QValues q;
  q.head1 = {s1, g1};
  q.head2 = {s2, g2};
  q.has_head1 = q.has_head2 = true;
  return q;
}

// Literal transcription of the target rule, organized differently from the
// implementation: enumerate both cross pairs explicitly.
double brute_force_target(double r, bool done, double gamma, const QValues& cur,
                          const QValues& lag) {
  if (done) return r;
  int argmax_h1 = 0, argmax_h2 = 0;
  for (int a = 0; a < 2; ++a) {
    if (cur.head1[a] > cur.head1[argmax_h1]) argmax_h1 = a;
    if (cur.head2[a] > cur.head2[argmax_h2]) argmax_h2 = a;
  }
  const double cross_a = lag.head1[argmax_h2];
  const double cross_b = lag.head2[argmax_h1];
  return r + gamma * (cross_a < cross_b ? cross_a : cross_b);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Transition rand_transition(Rng& rng) {
  Transition t;
  t.obs = rand_obs(rng, rng.uniform_int(1, 8));
  t.next_obs = rand_obs(rng, rng.uniform_int(1, 8));
  t.action = rng.uniform_int(0, 1) == 0 ? Action::Stop : Action::Go;
  t.reward = rng.uniform(-5.0, 5.0);
  t.done = rng.bernoulli(0.3);
  t.beta = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<EpisodeSpec> small_generic_specs(int count, uint64_t seed) {
  Rng rng(seed);
  std::vector<EpisodeSpec> specs;
  for (int i = 0; i < count; ++i) specs.push_back(gen_generic(shared_map(), 2, 4, rng));
  return specs;
}

std::vector<const EpisodeSpec*> as_ptrs(const std::vector<EpisodeSpec>& specs) {
  std::vector<const EpisodeSpec*> out;
  for (const EpisodeSpec& s : specs) out.push_back(&s);
  return out;
}

bool params_equal(const Parameters& a, const Parameters& b) {
  if (a.items.size() != b.items.size()) return false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].first != b.items[i].first) return false;
    if (a.items[i].second.v != b.items[i].second.v) return false;
  }
  return true;
}

}  // namespace

TEST(Epsilon, AnchorsAndMonotoneDecay) {
  const TrainConfig cfg;
  EXPECT_DOUBLE_EQ(epsilon_at(0, cfg), 1.0);
  EXPECT_NEAR(epsilon_at(250, cfg), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(epsilon_at(500, cfg), 0.01);
  EXPECT_DOUBLE_EQ(epsilon_at(5000, cfg), 0.01);
  double prev = 2.0;
  for (int t = 0; t <= 600; t += 7) {
    const double e = epsilon_at(t, cfg);
    EXPECT_LE(e, prev);
    prev = e;
  }
  EXPECT_THROW(epsilon_at(-1, cfg), std::invalid_argument);
}

TEST(TdTargetValues, TerminalTransitionsReturnTheReward) {
  const QValues cur = make_q(1, 2, 3, 4), lag = make_q(5, 6, 7, 8);
  EXPECT_DOUBLE_EQ(td_target_from_values(-42.5, true, 0.99, cur, lag), -42.5);
}

TEST(TdTargetValues, CrossCopyArithmetic) {
  // current head1 = [1, 2] (argmax Go), head2 = [3, 0] (argmax Stop);
  // lagged head1 at head2's argmax -> 5, lagged head2 at head1's argmax -> 8;
  // min = 5.
  const QValues cur = make_q(1, 2, 3, 0);
  const QValues lag = make_q(5, 6, 7, 8);
  EXPECT_DOUBLE_EQ(td_target_from_values(2.0, false, 0.99, cur, lag), 2.0 + 0.99 * 5.0);
}

TEST(TdTargetValues, IdenticalCopiesReduceToDoubleQ) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const QValues cur =
        make_q(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const double r = rng.uniform(-2, 2);
    const double y = td_target_from_values(r, false, 0.99, cur, cur);
    const int a1 = cur.head1[1] > cur.head1[0] ? 1 : 0;
    const int a2 = cur.head2[1] > cur.head2[0] ? 1 : 0;
    EXPECT_DOUBLE_EQ(y, r + 0.99 * std::min(cur.head1[a2], cur.head2[a1]));
  }
}

TEST(TdTargetValues, ArgmaxTiesResolveToStop) {
  // Both current heads tie, so both cross picks read the lagged Stop column.
  const QValues cur = make_q(1.5, 1.5, -2, -2);
  const QValues lag = make_q(10, -100, 20, -200);
  EXPECT_DOUBLE_EQ(td_target_from_values(0.0, false, 1.0, cur, lag), std::min(10.0, 20.0));
}

TEST(TdTargetValues, BruteForceAgreementOnThousandDraws) {
  Rng rng(2718);
  for (int i = 0; i < 1000; ++i) {
    const QValues cur =
        make_q(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9));
    const QValues lag =
        make_q(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9));
    const double r = rng.uniform(-5, 5);
    const bool done = rng.bernoulli(0.2);
    const double gamma = rng.uniform(0.5, 0.999);
    EXPECT_EQ(td_target_from_values(r, done, gamma, cur, lag),
              brute_force_target(r, done, gamma, cur, lag));
  }
}

TEST(TdTarget, NetworkFormMatchesValueForm) {
  const ArchSpec spec{ArchKind::MLP};
  const Parameters params = init_parameters(spec, 31);
  const Parameters lagged = init_parameters(spec, 32);
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const ObservationSet obs = rand_obs(rng, rng.uniform_int(1, 8));
    const double beta = rng.uniform(-1, 1);
    const double r = rng.uniform(-3, 3);
    const QValues cur = forward_q(spec, params, obs, beta, QHead::Both);
    const QValues lag = forward_q(spec, lagged, obs, beta, QHead::Both);
    EXPECT_DOUBLE_EQ(td_target(r, obs, false, beta, spec, params, lagged, 0.99),
                     td_target_from_values(r, false, 0.99, cur, lag));
  }
}

TEST(TdLoss, MatchesBruteForceScalar) {
  for (const ArchKind kind : {ArchKind::MLP, ArchKind::DeepSet}) {
    const ArchSpec spec{kind};
    const Parameters params = init_parameters(spec, 41);
    Parameters lagged = init_parameters(spec, 42);
    Rng rng(43);
    std::vector<Transition> storage;
    for (int i = 0; i < 12; ++i) storage.push_back(rand_transition(rng));
    std::vector<const Transition*> batch;
    for (const Transition& t : storage) batch.push_back(&t);

    Tape tape;
    const ParamRefs prefs = register_params(tape, params);
    const Tape::Ref loss = td_loss(tape, prefs, spec, batch, params, lagged, 0.99);
    const double got = tape.value(loss).v[0];

    double want = 0.0;
    for (const Transition& t : storage) {
      const double y = td_target(t.reward, t.next_obs, t.done, t.beta, spec, params, lagged, 0.99);
      const QValues q = forward_q(spec, params, t.obs, t.beta, QHead::Both);
      const int a = static_cast<int>(t.action);
      want += (q.head1[a] - y) * (q.head1[a] - y) + (q.head2[a] - y) * (q.head2[a] - y);
    }
    want /= static_cast<double>(storage.size());
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::fabs(want)));
  }
}

TEST(TdLoss, SingleTransitionArithmetic) {
  const ArchSpec spec{ArchKind::MLP};
  const Parameters params = init_parameters(spec, 51);
  const Parameters lagged = init_parameters(spec, 52);
  Rng rng(53);
  Transition t = rand_transition(rng);
  t.done = false;
  t.action = Action::Go;

  Tape tape;
  const ParamRefs prefs = register_params(tape, params);
  const Tape::Ref loss = td_loss(tape, prefs, spec, {&t}, params, lagged, 0.99);

  const double y = td_target(t.reward, t.next_obs, false, t.beta, spec, params, lagged, 0.99);
  const QValues q = forward_q(spec, params, t.obs, t.beta, QHead::Both);
  const double want =
      (q.head1[1] - y) * (q.head1[1] - y) + (q.head2[1] - y) * (q.head2[1] - y);
  EXPECT_DOUBLE_EQ(tape.value(loss).v[0], want);
}

TEST(TdLoss, GradientMatchesFiniteDifferencesWithFrozenTargets) {
  const ArchSpec spec{ArchKind::MLP};
  Parameters params = init_parameters(spec, 61);
  const Parameters lagged = init_parameters(spec, 62);
  Rng rng(63);
  std::vector<Transition> storage;
  for (int i = 0; i < 4; ++i) storage.push_back(rand_transition(rng));
  std::vector<const Transition*> batch;
  for (const Transition& t : storage) batch.push_back(&t);

  const auto loss_at = [&](const Parameters& p) {
    Tape tape;
    const ParamRefs prefs = register_params(tape, p);
    return tape.value(td_loss(tape, prefs, spec, batch, p, lagged, 0.99)).v[0];
  };

  Tape tape;
  const ParamRefs prefs = register_params(tape, params);
  const Tape::Ref loss = td_loss(tape, prefs, spec, batch, params, lagged, 0.99);
  tape.backward(loss);
  const Parameters grads = collect_grads(tape, prefs);

  // Spot-check one coordinate in several tensors against central differences.
  Rng pick(64);
  int checked = 0;
  for (std::size_t ti = 0; ti < params.items.size(); ti += 3) {
    auto& [name, tensor] = params.items[ti];
    const int k = pick.uniform_int(0, static_cast<int>(tensor.v.size()) - 1);
    const double eps = 1e-5;
    const double orig = tensor.v[k];
    tensor.v[k] = orig + eps;
    const double up = loss_at(params);
    tensor.v[k] = orig - eps;
    const double down = loss_at(params);
    tensor.v[k] = orig;
    const double fd = (up - down) / (2 * eps);
    const double an = grads.get(name).v[k];
    EXPECT_NEAR(an, fd, 1e-3 * std::max({1.0, std::fabs(an), std::fabs(fd)}))
        << "tensor " << name << " coord " << k;
    ++checked;
  }
  EXPECT_GE(checked, 4);
}

TEST(EvalAction, MatchesBruteForceMeanArgmax) {
  for (const ArchKind kind : {ArchKind::MLP, ArchKind::SocialAttention}) {
    const ArchSpec spec{kind};
    const Parameters params = init_parameters(spec, 71);
    Rng rng(72);
    for (int i = 0; i < 50; ++i) {
      const ObservationSet obs = rand_obs(rng, rng.uniform_int(1, 8));
      const double beta = rng.uniform(-1, 1);
      const QValues q = forward_q(spec, params, obs, beta, QHead::Both);
      const double mean_stop = (q.head1[0] + q.head2[0]) / 2.0;
      const double mean_go = (q.head1[1] + q.head2[1]) / 2.0;
      const Action want = mean_go > mean_stop ? Action::Go : Action::Stop;
      EXPECT_EQ(eval_action(spec, params, obs, beta), want);
    }
  }
}

TEST(EvalAction, ExactTieReturnsStop) {
  const ArchSpec spec{ArchKind::MLP};
  Parameters params = init_parameters(spec, 81);
  // Zero the final layer of both heads: every q-value becomes the (zeroed)
  // bias, a perfect tie.
  for (const std::string name : {"q1.L1.w", "q1.L1.b", "q2.L1.w", "q2.L1.b"}) {
    Tensor& t = params.get(name);
    std::fill(t.v.begin(), t.v.end(), 0.0);
  }
  Rng rng(82);
  const ObservationSet obs = rand_obs(rng, 4);
  const QValues q = forward_q(spec, params, obs, 0.25, QHead::Both);
  ASSERT_DOUBLE_EQ(q.head1[0], q.head1[1]);
  EXPECT_EQ(eval_action(spec, params, obs, 0.25), Action::Stop);
}

TEST(BehaviorAction, ReplicatesTheDocumentedStreamContract) {
  const ArchSpec spec{ArchKind::MLP};
  const Parameters params = init_parameters(spec, 91);
  const TrainConfig cfg;
  Rng data_rng(92);
  for (const int t : {0, 100, 250, 600}) {
    const ObservationSet obs = rand_obs(data_rng, 3);
    const double beta = data_rng.uniform(-1, 1);
    Rng a(1234 + t), b(1234 + t);
    const Action got = behavior_action(spec, params, obs, beta, t, cfg, a);
    // Manual replica: explore coin first, uniform action second.
    Action want;
    if (b.bernoulli(epsilon_at(t, cfg)))
      want = b.uniform_int(0, 1) == 0 ? Action::Stop : Action::Go;
    else
      want = eval_action(spec, params, obs, beta);
    EXPECT_EQ(got, want);
  }
}

TEST(BehaviorAction, ExplorationRateFollowsTheSchedule) {
  const ArchSpec spec{ArchKind::MLP};
  const Parameters params = init_parameters(spec, 95);
  const TrainConfig cfg;
  Rng data_rng(96);
  const ObservationSet obs = rand_obs(data_rng, 2);
  const Action greedy = eval_action(spec, params, obs, 0.0);

  Rng coin(97);
  int both[2] = {0, 0};
  for (int i = 0; i < 400; ++i)
    both[static_cast<int>(behavior_action(spec, params, obs, 0.0, 0, cfg, coin))]++;
  // t = 0: fully random, both actions should each appear in roughly half.
  EXPECT_GT(both[0], 120);
  EXPECT_GT(both[1], 120);

  int non_greedy = 0;
  for (int i = 0; i < 400; ++i)
    if (behavior_action(spec, params, obs, 0.0, 10000, cfg, coin) != greedy) ++non_greedy;
  // t >> horizon: epsilon = 1%, so non-greedy actions are rare.
  EXPECT_LE(non_greedy, 20);
}

TEST(ReplayBuffer, FifoEvictionKeepsInsertionOrder) {
  ReplayBuffer buf(5);
  Rng rng(101);
  for (int i = 0; i < 8; ++i) {
    Transition t = rand_transition(rng);
    t.reward = i;  // tag
    buf.push(std::move(t));
  }
  EXPECT_EQ(buf.size(), 5u);
  EXPECT_EQ(buf.capacity(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(buf.at(i).reward, 3.0 + i);
  EXPECT_THROW(buf.at(5), std::out_of_range);
}

TEST(ReplayBuffer, SeededSamplingIsReproducible) {
  ReplayBuffer buf(100);
  Rng rng(111);
  for (int i = 0; i < 60; ++i) {
    Transition t = rand_transition(rng);
    t.reward = i;
    buf.push(std::move(t));
  }
  Rng s1(7), s2(7), s3(8);
  const auto a = buf.sample(16, s1);
  const auto b = buf.sample(16, s2);
  const auto c = buf.sample(16, s3);
  ASSERT_EQ(a.size(), 16u);
  bool same_ab = true, same_ac = true;
  for (int i = 0; i < 16; ++i) {
    same_ab = same_ab && a[i] == b[i];
    same_ac = same_ac && a[i] == c[i];
  }
  EXPECT_TRUE(same_ab);
  EXPECT_FALSE(same_ac);
  Rng s4(9);
  EXPECT_THROW(buf.sample(61, s4), std::invalid_argument);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(Validate, ReportsConsistentPercentages) {
  const std::vector<EpisodeSpec> specs = small_generic_specs(4, 121);
  const ArchSpec arch{ArchKind::MLP};
  const Parameters params = init_parameters(arch, 122);
  const ValidationStats stats = validate(shared_map(), arch, params, as_ptrs(specs));
  EXPECT_NEAR(stats.success + stats.collision + stats.timeout, 100.0, 1e-9);
  EXPECT_GE(stats.success, 0.0);
  EXPECT_GE(stats.collision, 0.0);
  EXPECT_GE(stats.timeout, 0.0);
}

TEST(Train, TinyRunIsDeterministicAndShapedRight) {
  const std::vector<EpisodeSpec> train_specs = small_generic_specs(4, 131);
  const std::vector<EpisodeSpec> val_specs = small_generic_specs(2, 132);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.replay_capacity = 4096;
  cfg.episodes = 4;
  cfg.val_period = 100;  // untrained + final only
  cfg.seed = 777;
  const ArchSpec arch{ArchKind::MLP};

  const TrainResult a = train(shared_map(), arch, cfg, as_ptrs(train_specs), as_ptrs(val_specs));
  const TrainResult b = train(shared_map(), arch, cfg, as_ptrs(train_specs), as_ptrs(val_specs));

  ASSERT_EQ(a.curve.size(), 5u);  // untrained row + 4 episodes
  EXPECT_EQ(a.curve[0].episode, 0);
  EXPECT_FALSE(a.curve[0].has_train_cols);
  ASSERT_TRUE(a.curve[0].val.has_value());
  ASSERT_TRUE(a.curve[4].val.has_value());
  EXPECT_FALSE(a.curve[1].val.has_value());
  for (int i = 1; i <= 4; ++i) {
    EXPECT_EQ(a.curve[i].episode, i);
    EXPECT_GT(a.curve[i].env_steps, 0);
  }
  // One gradient step per env step once the buffer is warm, so the step
  // counter of any delivered snapshot is bounded by total env steps.
  EXPECT_LE(a.trained.step, static_cast<uint64_t>(a.curve.back().env_steps));

  // The delivered checkpoint is the best validation snapshot: its stats match
  // the best curve row (success first, mean return as tie-break), and
  // re-validating the stored parameters reproduces those stats exactly.
  const ValidationStats* best = nullptr;
  for (const CurveRow& row : a.curve) {
    if (!row.val) continue;
    if (!best || row.val->success > best->success ||
        (row.val->success == best->success && row.val->mean_return > best->mean_return))
      best = &*row.val;
  }
  ASSERT_NE(best, nullptr);
  EXPECT_DOUBLE_EQ(a.trained_val.success, best->success);
  EXPECT_DOUBLE_EQ(a.trained_val.mean_return, best->mean_return);
  const ValidationStats revalidated =
      validate(shared_map(), arch, a.trained.params, as_ptrs(val_specs));
  EXPECT_DOUBLE_EQ(revalidated.success, a.trained_val.success);
  EXPECT_DOUBLE_EQ(revalidated.collision, a.trained_val.collision);
  EXPECT_DOUBLE_EQ(revalidated.timeout, a.trained_val.timeout);
  EXPECT_DOUBLE_EQ(revalidated.mean_return, a.trained_val.mean_return);

  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].env_steps, b.curve[i].env_steps);
    EXPECT_DOUBLE_EQ(a.curve[i].mean_reward, b.curve[i].mean_reward);
    EXPECT_DOUBLE_EQ(a.curve[i].loss, b.curve[i].loss);
  }
  EXPECT_TRUE(params_equal(a.trained.params, b.trained.params));
  EXPECT_TRUE(params_equal(a.untrained.params, b.untrained.params));
}

TEST(Train, WarmupSkipsGradientStepsUntilABatchExists) {
  const std::vector<EpisodeSpec> train_specs = small_generic_specs(2, 141);
  const std::vector<EpisodeSpec> val_specs = small_generic_specs(1, 142);
  TrainConfig cfg;
  cfg.batch_size = 100000;  // never reached
  cfg.episodes = 2;
  cfg.val_period = 100;
  cfg.seed = 5;
  const ArchSpec arch{ArchKind::MLP};
  const TrainResult r = train(shared_map(), arch, cfg, as_ptrs(train_specs), as_ptrs(val_specs));
  EXPECT_EQ(r.trained.step, 0u);
  for (const CurveRow& row : r.curve)
    if (row.has_train_cols) EXPECT_DOUBLE_EQ(row.loss, 0.0);
  EXPECT_TRUE(params_equal(r.trained.params, r.untrained.params));
}

TEST(Train, CurveCsvIsStableAndWellFormed) {
  const std::vector<EpisodeSpec> train_specs = small_generic_specs(2, 151);
  const std::vector<EpisodeSpec> val_specs = small_generic_specs(1, 152);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.episodes = 2;
  cfg.val_period = 1;  // validate every episode
  cfg.seed = 6;
  const ArchSpec arch{ArchKind::MLP};
  const TrainResult r = train(shared_map(), arch, cfg, as_ptrs(train_specs), as_ptrs(val_specs));

  const std::string p1 = std::string(::testing::TempDir()) + "curve_a.csv";
  const std::string p2 = std::string(::testing::TempDir()) + "curve_b.csv";
  write_curve_csv(r, p1);
  write_curve_csv(r, p2);
  const std::string text = slurp(p1);
  EXPECT_EQ(text, slurp(p2));

  std::stringstream ss(text);
  std::string line;
  ASSERT_TRUE(std::getline(ss, line));
  EXPECT_EQ(line, "episode,env_steps,mean_reward,loss,val_success,val_collision,val_timeout");
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
  }
  EXPECT_EQ(rows, 3);  // untrained + 2 episodes

  // The untrained row carries only validation columns.
  std::stringstream ss2(text);
  std::getline(ss2, line);
  std::getline(ss2, line);
  EXPECT_EQ(line.rfind("0,0,,,", 0), 0u);
}
