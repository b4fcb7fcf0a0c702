#include "crossway/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>

#include "crossway/geom.hpp"
#include "crossway/observe.hpp"
#include "crossway/rng.hpp"
#include "crossway/textio.hpp"
#include "crossway/train.hpp"

namespace crossway {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMinStartOffset = 0.5;  // curated floor for start arcs

std::string csv_cell(double v) { return std::isnan(v) ? std::string() : fmt_double(v); }

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double pop_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

// Linear-interpolation percentile of a sorted sample, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double idx = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = idx - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

// Visits (state before the step, ego's action, ego's step reward) at every
// ego decision point, then advances; returns the terminal status.
using StepVisitor = std::function<void(const WorldState&, Action, const RewardBreakdown&)>;

EpisodeStatus roll_episode(WorldState w, const Policy& ego, const Policy& others,
                           const SimParams& p, const StepVisitor& visit) {
  while (w.status == EpisodeStatus::Running) {
    const AgentState* me = w.find(w.ego_id);
    const bool ego_live = me != nullptr && !me->done;
    Action ego_action = Action::Stop;
    std::map<int, Action> actions;
    for (const AgentState& a : w.agents) {
      if (a.done) continue;
      actions[a.id] = a.id == w.ego_id ? (ego_action = ego(w, a.id)) : others(w, a.id);
    }
    WorldState next = step(w, actions, p);
    if (ego_live && visit) {
      const StepEvents events = ego_events(w, next, p);
      visit(w, ego_action, ego_reward(me->beta, events, p));
    }
    w = std::move(next);
  }
  return w.status;
}

// Arc length on the route closest to a point: coarse pass over the waypoint
// grid, fine pass at centimeter resolution around the winner.
double arc_nearest(const RoutePlan& route, Vec2 point) {
  std::size_t best_k = 0;
  double best = kInf;
  for (std::size_t k = 0; k < route.waypoints.size(); ++k) {
    const double d = dist(route.waypoints[k], point);
    if (d < best) {
      best = d;
      best_k = k;
    }
  }
  const double lo = std::max(0.0, route.cum[best_k] - 1.0);
  const double hi = std::min(route.total_length, route.cum[best_k] + 1.0);
  double best_s = route.cum[best_k];
  for (double s = lo; s <= hi + 1e-9; s += 0.01) {
    const double d = dist(route.pose_at(std::min(s, route.total_length)).pos, point);
    if (d < best) {
      best = d;
      best_s = s;
    }
  }
  return best_s;
}

struct Tally {
  long episodes = 0;
  long success = 0, collision = 0, timeout = 0;
  double steps = 0.0;

  void add(EpisodeStatus status, int length) {
    ++episodes;
    steps += length;
    switch (status) {
      case EpisodeStatus::Success: ++success; break;
      case EpisodeStatus::Collision: ++collision; break;
      case EpisodeStatus::Timeout: ++timeout; break;
      case EpisodeStatus::Running: throw std::logic_error("episode ended while running");
    }
  }
  double pct(long n) const { return 100.0 * static_cast<double>(n) / static_cast<double>(episodes); }
  double mean_steps() const { return steps / static_cast<double>(episodes); }
};

}  // namespace

Policy checkpoint_policy(const ArchSpec& spec, Parameters params, const SimParams& p) {
  auto shared = std::make_shared<const Parameters>(std::move(params));
  return [spec, shared, p](const WorldState& w, int id) {
    const ObservationSet obs = encode(w, id, p.obs_radius, 5);
    return eval_action(spec, *shared, obs, w.find(id)->beta);
  };
}

std::string episode_kind_label(const LaneGraph& map, const EpisodeSpec& spec) {
  if (!spec.conflict_point) return "open-road";
  const Vec2 pt = *spec.conflict_point;
  int nearest = -1;
  double nearest_d = kInf;
  for (std::size_t j = 0; j < map.junctions.size(); ++j) {
    const Junction& jn = map.junctions[j];
    const double dx = std::fabs(pt.x - jn.center.x);
    const double dy = std::fabs(pt.y - jn.center.y);
    if (dx <= jn.half_size && dy <= jn.half_size) return to_string(jn.kind);
    const double d = dist(pt, jn.center);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = static_cast<int>(j);
    }
  }
  if (nearest < 0) return "open-road";
  return to_string(map.junctions[nearest].kind);
}

MetricsReport evaluate(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                       const PolicyFactory& ego, const std::vector<uint64_t>& seeds,
                       double noise_p, const SimParams& p) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  if (seeds.empty()) throw std::invalid_argument("evaluate: no evaluation seeds");
  if (!(noise_p >= 0.0 && noise_p <= 1.0))
    throw std::invalid_argument("evaluate: noise probability outside [0, 1]");

  std::vector<std::string> labels;
  labels.reserve(split.size());
  for (const EpisodeSpec* spec : split) labels.push_back(episode_kind_label(map, *spec));

  const Policy planner = make_oracle({}, p);
  MetricsReport report;
  report.episodes = static_cast<int>(split.size());

  std::vector<double> ttf, coll, tout, succ;
  std::map<std::string, Tally> by_kind;
  for (const uint64_t seed : seeds) {
    const Policy ego_policy = ego(seed);
    Tally tally;
    for (std::size_t i = 0; i < split.size(); ++i) {
      const EpisodeSpec& spec = *split[i];
      WorldState w = make_world(map, spec, p);
      const Policy others =
          noise_p > 0.0 ? with_action_noise(planner, noise_p, mix_seed(seed, spec.seed)) : planner;
      const EpisodeResult r = run_episode(std::move(w), ego_policy, others, p);
      tally.add(r.status, r.length);
      by_kind[labels[i]].add(r.status, r.length);
    }
    SeedMetrics row;
    row.seed = seed;
    row.time_to_finish = tally.mean_steps();
    row.collision_pct = tally.pct(tally.collision);
    row.timeout_pct = tally.pct(tally.timeout);
    row.success_pct = tally.pct(tally.success);
    report.per_seed.push_back(row);
    ttf.push_back(row.time_to_finish);
    coll.push_back(row.collision_pct);
    tout.push_back(row.timeout_pct);
    succ.push_back(row.success_pct);
  }

  report.time_to_finish = mean_of(ttf);
  report.collision_pct = mean_of(coll);
  report.timeout_pct = mean_of(tout);
  report.success_pct = mean_of(succ);
  report.time_to_finish_std = pop_std(ttf);
  report.collision_std = pop_std(coll);
  report.timeout_std = pop_std(tout);
  report.success_std = pop_std(succ);

  for (const auto& [kind, tally] : by_kind) {
    KindMetrics km;
    km.kind = kind;
    km.episodes = static_cast<int>(tally.episodes / static_cast<long>(seeds.size()));
    km.time_to_finish = tally.mean_steps();
    km.collision_pct = tally.pct(tally.collision);
    km.timeout_pct = tally.pct(tally.timeout);
    km.success_pct = tally.pct(tally.success);
    report.per_kind.push_back(km);
  }
  return report;
}

MetricsReport noise_robustness(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                               const PolicyFactory& ego, const std::vector<uint64_t>& seeds,
                               double noise_p, const SimParams& p) {
  return evaluate(map, split, ego, seeds, noise_p, p);
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  CsvWriter csv(path);
  csv.row("scope", "label", "episodes", "time_to_finish", "collision_pct", "timeout_pct",
          "success_pct");
  csv.row("overall", "mean", report.episodes, report.time_to_finish, report.collision_pct,
          report.timeout_pct, report.success_pct);
  csv.row("overall", "std", report.episodes, report.time_to_finish_std, report.collision_std,
          report.timeout_std, report.success_std);
  for (const SeedMetrics& s : report.per_seed) {
    csv.row("seed", std::to_string(s.seed), report.episodes, s.time_to_finish, s.collision_pct,
            s.timeout_pct, s.success_pct);
  }
  for (const KindMetrics& k : report.per_kind) {
    csv.row("kind", k.kind, k.episodes, k.time_to_finish, k.collision_pct, k.timeout_pct,
            k.success_pct);
  }
}

nlohmann::ordered_json metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["episodes"] = report.episodes;
  j["time_to_finish"] = report.time_to_finish;
  j["collision_pct"] = report.collision_pct;
  j["timeout_pct"] = report.timeout_pct;
  j["success_pct"] = report.success_pct;
  j["time_to_finish_std"] = report.time_to_finish_std;
  j["collision_std"] = report.collision_std;
  j["timeout_std"] = report.timeout_std;
  j["success_std"] = report.success_std;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const SeedMetrics& s : report.per_seed) {
    seeds.push_back({{"seed", s.seed},
                     {"time_to_finish", s.time_to_finish},
                     {"collision_pct", s.collision_pct},
                     {"timeout_pct", s.timeout_pct},
                     {"success_pct", s.success_pct}});
  }
  j["per_seed"] = std::move(seeds);
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  for (const KindMetrics& k : report.per_kind) {
    kinds.push_back({{"kind", k.kind},
                     {"episodes", k.episodes},
                     {"time_to_finish", k.time_to_finish},
                     {"collision_pct", k.collision_pct},
                     {"timeout_pct", k.timeout_pct},
                     {"success_pct", k.success_pct}});
  }
  j["per_kind"] = std::move(kinds);
  return j;
}

void write_analysis_csv(const AnalysisRecord& record, const std::string& path) {
  CsvWriter csv(path);
  csv.row(record.columns);
  for (const std::vector<double>& row : record.rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(csv_cell(v));
    csv.row(cells);
  }
}

AnalysisRecord perturbation_study(const LaneGraph& map,
                                  const std::vector<const EpisodeSpec*>& scenes,
                                  const Policy& ego, const std::vector<double>& offsets,
                                  const SimParams& p) {
  if (scenes.empty()) throw std::invalid_argument("perturbation_study: no scenes");
  if (offsets.empty()) throw std::invalid_argument("perturbation_study: empty offset grid");

  struct Scene {
    EpisodeSpec spec;
    std::size_t other_idx = 0;
    double other_total = 0.0;
    double other_s_star = 0.0;  // conflict-point arc on the other's route
    double v_other = 0.0;
    double t_ego = 0.0;  // ego's nominal arrival at the conflict point, seconds
  };
  std::vector<Scene> prepared;
  for (const EpisodeSpec* raw : scenes) {
    if (!raw->conflict_point || raw->agents.size() != 2)
      throw std::invalid_argument(
          "perturbation_study: scenes must be two-agent crossings with a conflict point");
    Scene sc;
    sc.spec = *raw;
    const std::size_t ego_idx = sc.spec.agents[0].id == sc.spec.ego_id ? 0 : 1;
    sc.other_idx = 1 - ego_idx;
    const AgentSpec& ego_a = sc.spec.agents[ego_idx];
    const AgentSpec& other = sc.spec.agents[sc.other_idx];
    const RoutePlan ego_route = shortest_route(map, ego_a.spawn, ego_a.goal);
    const RoutePlan other_route = shortest_route(map, other.spawn, other.goal);
    sc.other_total = other_route.total_length;
    sc.other_s_star = arc_nearest(other_route, *sc.spec.conflict_point);
    sc.v_other = nominal_speed(other.beta);
    const double ego_s_star = arc_nearest(ego_route, *sc.spec.conflict_point);
    sc.t_ego = (ego_s_star - ego_a.start_offset) / nominal_speed(ego_a.beta);
    prepared.push_back(std::move(sc));
  }

  std::vector<double> grid = offsets;
  std::sort(grid.begin(), grid.end());

  const Policy planner = make_oracle({}, p);
  AnalysisRecord rec;
  rec.kind = "perturbation";
  rec.columns = {"offset_s", "scenes", "go_pct"};

  struct Band {
    const char* name;
    std::function<bool(double)> in;
    std::vector<double> values;
  };
  std::vector<Band> bands;
  bands.push_back({"go_pct_ego_precedes_ge_0_3", [](double t) { return t <= -0.3; }, {}});
  bands.push_back({"go_pct_ego_precedes_ge_1_5", [](double t) { return t <= -1.5; }, {}});
  bands.push_back({"go_pct_ambiguous", [](double t) { return std::fabs(t) <= 0.3; }, {}});
  bands.push_back({"go_pct_other_precedes_ge_0_3", [](double t) { return t >= 0.3; }, {}});
  bands.push_back({"go_pct_other_precedes_ge_1_5", [](double t) { return t >= 1.5; }, {}});

  for (const double tau : grid) {
    long used = 0;
    double go_sum = 0.0;
    for (const Scene& sc : prepared) {
      const double t_other = sc.t_ego - tau;  // seconds; tau > 0 = other first
      if (t_other < 0.0) continue;            // other would start past the crossing
      const double s0 = sc.other_s_star - sc.v_other * t_other;
      if (s0 < kMinStartOffset || s0 > sc.other_total) continue;
      EpisodeSpec spec = sc.spec;
      spec.agents[sc.other_idx].start_offset = s0;
      long go = 0, steps = 0;
      roll_episode(make_world(map, spec, p), ego, planner, p,
                   [&](const WorldState&, Action a, const RewardBreakdown&) {
                     ++steps;
                     if (a == Action::Go) ++go;
                   });
      if (steps == 0) continue;
      go_sum += 100.0 * static_cast<double>(go) / static_cast<double>(steps);
      ++used;
    }
    const double value = used > 0 ? go_sum / static_cast<double>(used) : kNaN;
    rec.rows.push_back({tau, static_cast<double>(used), value});
    if (used > 0) {
      for (Band& b : bands) {
        if (b.in(tau)) b.values.push_back(value);
      }
    }
  }

  rec.summary["offsets"] = grid.size();
  rec.summary["scenes"] = prepared.size();
  for (const Band& b : bands) {
    if (!b.values.empty()) rec.summary[b.name] = mean_of(b.values);
  }
  return rec;
}

AnalysisRecord min_ttc_study(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                             const std::string& name_a, const Policy& policy_a,
                             const std::string& name_b, const Policy& policy_b,
                             const SimParams& p) {
  if (split.empty()) throw std::invalid_argument("min_ttc_study: empty split");
  const double horizon_s = p.ttc_horizon * p.dt;
  const int n_bins = static_cast<int>(std::ceil(horizon_s)) + 1;  // last bin: >= horizon

  struct Bin {
    long steps = 0;
    long go = 0;
  };
  const Policy planner = make_oracle({}, p);
  auto scan = [&](const Policy& pol) {
    std::vector<Bin> bins(static_cast<std::size_t>(n_bins));
    for (const EpisodeSpec* spec : split) {
      roll_episode(make_world(map, *spec, p), pol, planner, p,
                   [&](const WorldState& w, Action a, const RewardBreakdown&) {
                     double min_ttc = kInf;
                     for (const AgentState& other : w.agents) {
                       if (other.id == w.ego_id || other.done) continue;
                       min_ttc = std::min(
                           min_ttc, time_to_collision(w, w.ego_id, other.id, Action::Go,
                                                      Action::Go, p));
                     }
                     const int idx =
                         min_ttc >= horizon_s ? n_bins - 1 : static_cast<int>(min_ttc);
                     Bin& b = bins[static_cast<std::size_t>(idx)];
                     ++b.steps;
                     if (a == Action::Go) ++b.go;
                   });
    }
    return bins;
  };

  const std::vector<Bin> bins_a = scan(policy_a);
  const std::vector<Bin> bins_b = scan(policy_b);

  AnalysisRecord rec;
  rec.kind = "minttc";
  rec.columns = {"bin_lo_s", "bin_hi_s", name_a + "_steps", name_a + "_go_pct",
                 name_b + "_steps", name_b + "_go_pct"};
  const auto go_pct = [](const Bin& b) {
    return b.steps == 0 ? kNaN : 100.0 * static_cast<double>(b.go) / static_cast<double>(b.steps);
  };
  int smallest = -1;
  for (int i = 0; i < n_bins; ++i) {
    const Bin& a = bins_a[static_cast<std::size_t>(i)];
    const Bin& b = bins_b[static_cast<std::size_t>(i)];
    if (a.steps == 0 && b.steps == 0) continue;  // empty under both policies
    const double lo = static_cast<double>(i);
    const double hi = i == n_bins - 1 ? kInf : lo + 1.0;
    rec.rows.push_back({lo, hi, static_cast<double>(a.steps), go_pct(a),
                        static_cast<double>(b.steps), go_pct(b)});
    if (smallest < 0 && a.steps > 0 && b.steps > 0) smallest = i;
  }
  rec.summary["policy_a"] = name_a;
  rec.summary["policy_b"] = name_b;
  if (smallest >= 0) {
    rec.summary["smallest_shared_bin_lo_s"] = static_cast<double>(smallest);
    rec.summary[name_a + "_go_pct_smallest_bin"] = go_pct(bins_a[smallest]);
    rec.summary[name_b + "_go_pct_smallest_bin"] = go_pct(bins_b[smallest]);
  }
  return rec;
}

AnalysisRecord counterfactual_log(const LaneGraph& map,
                                  const std::vector<const EpisodeSpec*>& split,
                                  const Policy& reference, const Policy& probe,
                                  double ttc_threshold, const SimParams& p) {
  const Policy planner = make_oracle({}, p);
  AnalysisRecord rec;
  rec.kind = "counterfactual";
  rec.columns = {"episode", "t", "min_ttc_s", "reference_go", "probe_go", "agree"};
  long total_steps = 0, flagged = 0, agreements = 0;
  for (std::size_t e = 0; e < split.size(); ++e) {
    roll_episode(make_world(map, *split[e], p), reference, planner, p,
                 [&](const WorldState& w, Action ref_action, const RewardBreakdown&) {
                   ++total_steps;
                   double min_ttc = kInf;
                   for (const AgentState& other : w.agents) {
                     if (other.id == w.ego_id || other.done) continue;
                     min_ttc = std::min(min_ttc, time_to_collision(w, w.ego_id, other.id,
                                                                   Action::Go, Action::Stop, p));
                   }
                   if (!(min_ttc < ttc_threshold)) return;
                   ++flagged;
                   const Action probe_action = probe(w, w.ego_id);
                   const bool agree = probe_action == ref_action;
                   if (agree) ++agreements;
                   rec.rows.push_back({static_cast<double>(e), static_cast<double>(w.t),
                                       min_ttc, ref_action == Action::Go ? 1.0 : 0.0,
                                       probe_action == Action::Go ? 1.0 : 0.0,
                                       agree ? 1.0 : 0.0});
                 });
  }
  rec.summary["episodes"] = split.size();
  rec.summary["ttc_threshold_s"] = ttc_threshold;
  rec.summary["total_ego_steps"] = total_steps;
  rec.summary["flagged_steps"] = flagged;
  rec.summary["agreements"] = agreements;
  rec.summary["disagreements"] = flagged - agreements;
  if (flagged > 0)
    rec.summary["agreement_pct"] =
        100.0 * static_cast<double>(agreements) / static_cast<double>(flagged);
  return rec;
}

AnalysisRecord driver_type_sweep(const LaneGraph& map,
                                 const std::vector<const EpisodeSpec*>& split,
                                 const std::function<Policy(double beta)>& ego_for_beta,
                                 std::vector<double> betas,
                                 const std::vector<uint64_t>& seeds, const SimParams& p) {
  if (split.empty()) throw std::invalid_argument("driver_type_sweep: empty split");
  if (betas.empty()) throw std::invalid_argument("driver_type_sweep: no betas");
  for (double b : betas) {
    if (!(b >= -1.0 && b <= 1.0))
      throw std::invalid_argument("driver_type_sweep: beta outside [-1, 1]");
  }
  std::sort(betas.begin(), betas.end());

  AnalysisRecord rec;
  rec.kind = "sweep";
  rec.columns = {"beta", "time_to_finish", "collision_pct", "timeout_pct", "success_pct"};
  for (const double beta : betas) {
    std::vector<EpisodeSpec> owned;
    owned.reserve(split.size());
    for (const EpisodeSpec* spec : split) {
      EpisodeSpec copy = *spec;
      for (AgentSpec& a : copy.agents) {
        if (a.id == copy.ego_id) a.beta = beta;
      }
      owned.push_back(std::move(copy));
    }
    std::vector<const EpisodeSpec*> ptrs;
    ptrs.reserve(owned.size());
    for (const EpisodeSpec& s : owned) ptrs.push_back(&s);
    const Policy pol = ego_for_beta(beta);
    const MetricsReport m =
        evaluate(map, ptrs, [&](uint64_t) { return pol; }, seeds, 0.0, p);
    rec.rows.push_back(
        {beta, m.time_to_finish, m.collision_pct, m.timeout_pct, m.success_pct});
  }

  int inversions = 0;
  for (std::size_t i = 0; i + 1 < rec.rows.size(); ++i) {
    if (rec.rows[i + 1][1] > rec.rows[i][1] + 1e-9) ++inversions;
  }
  rec.summary["betas"] = betas;
  rec.summary["time_to_finish_inversions"] = inversions;
  rec.summary["non_increasing_with_one_inversion"] = inversions <= 1;
  return rec;
}

AnalysisRecord density_analysis(const LaneGraph& map,
                                const std::vector<const EpisodeSpec*>& split, const Policy& ego,
                                const SimParams& p) {
  if (split.empty()) throw std::invalid_argument("density_analysis: empty split");
  const int max_bin = 8;
  std::vector<std::vector<double>> rewards(static_cast<std::size_t>(max_bin) + 1);
  const Policy planner = make_oracle({}, p);
  for (const EpisodeSpec* spec : split) {
    roll_episode(make_world(map, *spec, p), ego, planner, p,
                 [&](const WorldState& w, Action, const RewardBreakdown& r) {
                   const AgentState& me = *w.find(w.ego_id);
                   int nearby = 0;
                   for (const AgentState& other : w.agents) {
                     if (other.id == w.ego_id || other.done) continue;
                     if (dist(me.pose().pos, other.pose().pos) <= p.obs_radius) ++nearby;
                   }
                   rewards[static_cast<std::size_t>(std::min(nearby, max_bin))].push_back(
                       r.total());
                 });
  }

  AnalysisRecord rec;
  rec.kind = "density";
  rec.columns = {"density", "steps", "p005", "q25", "median", "q75", "p995"};
  double med_lo = kInf, med_hi = -kInf, iqr_max = 0.0;
  for (int d = 0; d <= max_bin; ++d) {
    std::vector<double>& xs = rewards[static_cast<std::size_t>(d)];
    std::sort(xs.begin(), xs.end());
    const double q25 = percentile(xs, 0.25), med = percentile(xs, 0.5),
                 q75 = percentile(xs, 0.75);
    rec.rows.push_back({static_cast<double>(d), static_cast<double>(xs.size()),
                        percentile(xs, 0.005), q25, med, q75, percentile(xs, 0.995)});
    if (!xs.empty()) {
      med_lo = std::min(med_lo, med);
      med_hi = std::max(med_hi, med);
      iqr_max = std::max(iqr_max, q75 - q25);
    }
  }
  if (std::isfinite(med_lo)) {
    rec.summary["median_spread"] = med_hi - med_lo;
    rec.summary["iqr_max"] = iqr_max;
    rec.summary["medians_within_iqr"] = med_hi - med_lo < iqr_max;
  }
  return rec;
}

}  // namespace crossway
