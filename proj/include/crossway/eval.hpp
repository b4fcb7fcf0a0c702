#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossway/episodes.hpp"
#include "crossway/nets.hpp"
#include "crossway/planners.hpp"
#include "crossway/world.hpp"

namespace crossway {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct SeedMetrics {
  uint64_t seed = 0;
  double time_to_finish = 0.0;  // mean episode length in steps
  double collision_pct = 0.0;
  double timeout_pct = 0.0;
  double success_pct = 0.0;
};

struct KindMetrics {
  std::string kind;  // junction kind at the curated conflict point, or "open-road"
  int episodes = 0;  // per evaluation seed
  double time_to_finish = 0.0;
  double collision_pct = 0.0;
  double timeout_pct = 0.0;
  double success_pct = 0.0;
};

// Aggregate over a split: means and population stds across evaluation seeds,
// plus per-seed rows and a per-junction-kind breakdown (aggregated over all
// seeds; kind episode counts partition the split).
struct MetricsReport {
  int episodes = 0;  // episodes per seed
  double time_to_finish = 0.0;
  double collision_pct = 0.0;
  double timeout_pct = 0.0;
  double success_pct = 0.0;
  double time_to_finish_std = 0.0;
  double collision_std = 0.0;
  double timeout_std = 0.0;
  double success_std = 0.0;
  std::vector<SeedMetrics> per_seed;
  std::vector<KindMetrics> per_kind;
};

// Builds the ego policy for one evaluation seed (deterministic policies may
// ignore the seed).
using PolicyFactory = std::function<Policy(uint64_t seed)>;

// Ego controller that runs a trained value network greedily: encodes the
// world from the agent's frame and picks the action with the higher mean
// q-value (ties resolve to Stop). Reads the driver type from the world so
// driver-type sweeps see the override.
Policy checkpoint_policy(const ArchSpec& spec, Parameters params, const SimParams& p = {});

// The junction-kind label an episode counts toward: the junction whose box
// contains the curated conflict point (nearest junction center as fallback),
// or "open-road" when the spec has no conflict point.
std::string episode_kind_label(const LaneGraph& map, const EpisodeSpec& spec);

// Runs every episode of the split once per evaluation seed with ego = the
// factory's policy and all other agents driven by the rule planner; when
// noise_p > 0 the other agents' actions pass through with_action_noise,
// seeded per (evaluation seed, episode seed). Aggregates the standard
// metrics; success/collision/timeout percentages sum to 100 per seed.
// Throws std::invalid_argument on an empty split or noise_p outside [0, 1].
MetricsReport evaluate(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                       const PolicyFactory& ego, const std::vector<uint64_t>& seeds,
                       double noise_p = 0.0, const SimParams& p = {});

// evaluate with Bernoulli action noise of probability `noise_p` on the other
// agents (noise_p = 0 reduces to plain evaluate).
MetricsReport noise_robustness(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                               const PolicyFactory& ego, const std::vector<uint64_t>& seeds,
                               double noise_p, const SimParams& p = {});

void write_metrics_csv(const MetricsReport& report, const std::string& path);
nlohmann::ordered_json metrics_json(const MetricsReport& report);

// ---------------------------------------------------------------------------
// Behavioral analyses
// ---------------------------------------------------------------------------

// One analysis artifact: a CSV-shaped table (NaN cells render empty) plus a
// JSON summary of the headline aggregates.
struct AnalysisRecord {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::ordered_json summary;
};

void write_analysis_csv(const AnalysisRecord& record, const std::string& path);

// Arrival-offset sensitivity on two-agent crossing scenes. For each offset
// tau (seconds; positive = the other agent reaches the conflict point tau
// seconds before ego), every base scene is re-posed by sliding the other
// agent's start so the nominal arrival gap equals tau, then rolled out with
// ego = `ego` and the other agent on the rule planner. Records the mean
// percentage of ego decision steps choosing Go per offset; scenes that cannot
// realize an offset (start would leave the route) are skipped for that point.
// Summary reports the region means (ambiguous |tau| <= 0.3 s, clear >= 1.5 s).
// Throws std::invalid_argument if scenes is empty, offsets is empty, or a
// scene is not a two-agent crossing with a conflict point.
AnalysisRecord perturbation_study(const LaneGraph& map,
                                  const std::vector<const EpisodeSpec*>& scenes,
                                  const Policy& ego, const std::vector<double>& offsets,
                                  const SimParams& p = {});

// Bins every ego decision step by the minimum time-to-collision over other
// agents if both sides hold Go, and records each policy's Go-percentage per
// bin over its own rollouts of the split. Finite TTCs bin at 1 s width over
// [0, horizon); never-colliding steps fall in the unbounded bin. Bins empty
// under both policies are omitted.
AnalysisRecord min_ttc_study(const LaneGraph& map, const std::vector<const EpisodeSpec*>& split,
                             const std::string& name_a, const Policy& policy_a,
                             const std::string& name_b, const Policy& policy_b,
                             const SimParams& p = {});

// Rolls the split with ego = reference; at every ego decision step whose
// minimum TTC over others under (ego Go, other Stop) is below the threshold,
// records both the reference's and the probe's chosen action. Emits the
// per-step trace and agreement counts.
AnalysisRecord counterfactual_log(const LaneGraph& map,
                                  const std::vector<const EpisodeSpec*>& split,
                                  const Policy& reference, const Policy& probe,
                                  double ttc_threshold = 1.0, const SimParams& p = {});

// Re-evaluates the split with the ego driver type overridden to each beta
// (policy built per beta so conditioned controllers see the override).
// Records the four metrics per beta; the summary counts time-to-finish
// inversions (increases along ascending beta).
AnalysisRecord driver_type_sweep(const LaneGraph& map,
                                 const std::vector<const EpisodeSpec*>& split,
                                 const std::function<Policy(double beta)>& ego_for_beta,
                                 std::vector<double> betas,
                                 const std::vector<uint64_t>& seeds, const SimParams& p = {});

// Bins ego decision steps by the number of other agents inside the
// observation radius and records the per-bin distribution of the reward
// received on that step (0.5/25/50/75/99.5 percentiles, linear
// interpolation). Summary reports the spread of medians against the largest
// per-bin interquartile range.
AnalysisRecord density_analysis(const LaneGraph& map,
                                const std::vector<const EpisodeSpec*>& split, const Policy& ego,
                                const SimParams& p = {});

}  // namespace crossway
