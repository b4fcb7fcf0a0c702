#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/lane_graph.hpp"
#include "crossway/rng.hpp"
#include "crossway/world.hpp"

namespace crossway {

enum class EpisodeKind { Generic, Collision, Interaction };

std::string to_string(EpisodeKind kind);
EpisodeKind episode_kind_from_string(const std::string& name);

struct AgentSpec {
  int id = 0;
  Vec2 spawn;
  Vec2 goal;
  double start_offset = 0.0;  // arc length along the spawn->goal route at t=0
  double beta = 0.0;
};

// Self-contained description of one episode's initial conditions.
struct EpisodeSpec {
  EpisodeKind kind = EpisodeKind::Generic;
  int setting = 0;  // interaction setting 1..3, otherwise 0
  int ego_id = 0;
  uint64_t seed = 0;
  std::vector<AgentSpec> agents;         // ascending id
  std::vector<int> arrival_jitter;       // per conflict agent, timesteps
  std::optional<Vec2> conflict_point;    // curated shared location
};

struct GenerationExhausted : std::runtime_error {
  explicit GenerationExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Instantiate the episode on the map. Routes are rebuilt from spawn/goal, so
// specs stay self-contained and serializable.
WorldState make_world(const LaneGraph& map, const EpisodeSpec& spec, const SimParams& p = {});

// Uniformly random agent count in [n_min, n_max], distinct non-overlapping
// spawn placements, uniform goals, beta ~ U[-1, 1].
EpisodeSpec gen_generic(const LaneGraph& map, int n_min, int n_max, Rng& rng,
                        const SimParams& p = {});

// Crossing pair where ego (id 1) forced always-Go collides but an ego that
// yields appropriately does not. Rejection-sampled with rollout verification.
EpisodeSpec gen_collision(const LaneGraph& map, Rng& rng, const SimParams& p = {});

// Conflict scenes whose unconstrained arrivals at a shared lane intersection
// land within 4 timesteps of each other:
//   setting 1: two agents on crossing routes;
//   setting 2: setting 1 plus a third agent trailing ego at the minimum
//              car-following gap;
//   setting 3: three agents on pairwise-crossing routes arriving together.
EpisodeSpec gen_interaction(const LaneGraph& map, int setting, Rng& rng,
                            const SimParams& p = {});

// Largest pairwise difference (timesteps) between the conflict agents'
// unconstrained arrival steps at the curated conflict point, measured by an
// all-Go rollout in which agents pass through one another. Requires a
// conflict_point.
int arrival_window(const LaneGraph& map, const EpisodeSpec& spec, const SimParams& p = {});

// True when (a) ego forced always-Go against yielding traffic ends in
// Collision and (b) the same scene with a yielding ego does not.
bool verify_collision_spec(const LaneGraph& map, const EpisodeSpec& spec,
                           const SimParams& p = {});

// Dataset shape. Defaults reproduce the full-scale counts; scaled() shrinks
// every split by one factor with mixes preserved.
struct DatasetCounts {
  int train = 3000;  // mixed 25% generic / 25% collision / 50% interaction
  int val_generic = 100;
  int val_interaction = 100;
  int test_generic = 250;
  int test_interaction = 250;
  int interaction_pool = 1917;       // pool that test-interaction draws from
  int test_interaction_draw = 381;

  static DatasetCounts scaled(double factor);
};

struct ManifestEntry {
  std::string split;  // train | val | test | test-interaction
  EpisodeSpec spec;
};

struct DatasetManifest {
  uint64_t seed = 0;
  double scale = 1.0;
  std::vector<ManifestEntry> entries;

  std::vector<const EpisodeSpec*> split(const std::string& name) const;
  std::vector<std::string> split_names() const;  // in first-appearance order
};

// Content hash over every field of every spec (FNV-1a 64 of the canonical
// serialized form, excluding the hash itself).
uint64_t manifest_hash(const DatasetManifest& manifest);

DatasetManifest build_datasets(const LaneGraph& map, const DatasetCounts& counts, uint64_t seed,
                               double scale_label = 1.0, const SimParams& p = {});

void save_manifest(const DatasetManifest& manifest, const std::string& path);
// Throws std::runtime_error on parse failure or content-hash mismatch.
DatasetManifest load_manifest(const std::string& path);

}  // namespace crossway
