#include "crossway/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <utility>

#include <json.hpp>

#include "crossway/planners.hpp"
#include "crossway/textio.hpp"

namespace crossway {

namespace {

constexpr int kMaxAttempts = 1000;
constexpr double kMinStartOffset = 0.5;   // keep agents strictly on-route
constexpr double kMinRouteLen = 25.0;     // conflict routes need room to approach
constexpr double kCrossDistMax = 1.0;     // routes this close count as crossing
constexpr double kEntryMargin = 8.0;      // conflict at least this far along a route
constexpr double kExitMargin = 5.0;       // and this far from the route end
constexpr double kMinCrossDeg = 25.0;     // transversal-crossing heading window
constexpr double kMaxCrossDeg = 155.0;
constexpr int kArrivalLo = 10;            // curated nominal arrival step range
constexpr int kArrivalHi = 25;
constexpr int kJitterMax = 4;             // per-agent arrival jitter bound
constexpr int kWindowMax = 4;             // admissible pairwise arrival spread
constexpr double kClusterRadius = 10.0;   // three-way conflicts stay this tight
constexpr int kFinishSlackSteps = 70;     // timeout budget reserved for yielding

// An episode only counts as winnable if the ego can cover its remaining route
// inside the timeout even after spending the slack stopped.
bool ego_can_finish(const RoutePlan& route, double s0, double beta, const SimParams& p) {
  return route.total_length - s0 <=
         nominal_speed(beta) * p.dt * (p.t_max - kFinishSlackSteps);
}

double heading_gap(double ha, double hb) {
  constexpr double kTwoPi = 2.0 * M_PI;
  double d = std::fabs(std::fmod(ha - hb, kTwoPi));
  if (d > M_PI) d = kTwoPi - d;
  return d;
}

struct RouteDraw {
  Vec2 spawn;
  Vec2 goal;
  RoutePlan route;
};

std::optional<RouteDraw> draw_route(const LaneGraph& map, Rng& rng, double min_len) {
  const int si = rng.uniform_int(0, static_cast<int>(map.spawns.size()) - 1);
  const int gi = rng.uniform_int(0, static_cast<int>(map.goals.size()) - 1);
  const Vec2 spawn = map.spawns[si], goal = map.goals[gi];
  if (dist(spawn, goal) < 1e-9) return std::nullopt;
  RoutePlan route;
  try {
    route = shortest_route(map, spawn, goal);
  } catch (const NoRoute&) {
    return std::nullopt;
  }
  if (route.total_length < min_len) return std::nullopt;
  return RouteDraw{spawn, goal, std::move(route)};
}

struct Approach {
  double s_a = 0.0;
  double s_b = 0.0;
  double dist = std::numeric_limits<double>::infinity();
  Vec2 point;
};

// Closest waypoint pair between two routes: coarse pass at a wide stride,
// then full resolution around the coarse winner.
Approach closest_approach(const RoutePlan& a, const RoutePlan& b) {
  const auto& wa = a.waypoints;
  const auto& wb = b.waypoints;
  const size_t stride = 4;
  size_t ci = 0, cj = 0;
  double best2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < wa.size(); i += stride) {
    for (size_t j = 0; j < wb.size(); j += stride) {
      const double dx = wa[i].x - wb[j].x, dy = wa[i].y - wb[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best2) {
        best2 = d2;
        ci = i;
        cj = j;
      }
    }
  }
  const size_t pad = 2 * stride;
  const size_t ilo = ci > pad ? ci - pad : 0, ihi = std::min(wa.size(), ci + pad + 1);
  const size_t jlo = cj > pad ? cj - pad : 0, jhi = std::min(wb.size(), cj + pad + 1);
  size_t bi = ci, bj = cj;
  best2 = std::numeric_limits<double>::infinity();
  for (size_t i = ilo; i < ihi; ++i) {
    for (size_t j = jlo; j < jhi; ++j) {
      const double dx = wa[i].x - wb[j].x, dy = wa[i].y - wb[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best2) {
        best2 = d2;
        bi = i;
        bj = j;
      }
    }
  }
  Approach out;
  out.s_a = a.cum[bi];
  out.s_b = b.cum[bj];
  out.dist = std::sqrt(best2);
  out.point = (wa[bi] + wb[bj]) * 0.5;
  return out;
}

double arc_nearest(const RoutePlan& r, Vec2 p) {
  size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < r.waypoints.size(); ++i) {
    const double d = dist(r.waypoints[i], p);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return r.cum[best];
}

bool crossing_angle_ok(const RoutePlan& a, double s_a, const RoutePlan& b, double s_b) {
  constexpr double d2r = M_PI / 180.0;
  const double gap = heading_gap(a.pose_at(s_a).heading, b.pose_at(s_b).heading);
  return gap >= kMinCrossDeg * d2r && gap <= kMaxCrossDeg * d2r;
}

struct CrossDraw {
  RouteDraw a;  // yields agent id 0
  RouteDraw b;  // yields the ego, agent id 1
  double s_a = 0.0;
  double s_b = 0.0;
  Vec2 point;
};

std::optional<CrossDraw> draw_crossing(const LaneGraph& map, Rng& rng) {
  auto a = draw_route(map, rng, kMinRouteLen);
  auto b = draw_route(map, rng, kMinRouteLen);
  if (!a || !b) return std::nullopt;
  const Approach ap = closest_approach(a->route, b->route);
  if (!(ap.dist < kCrossDistMax)) return std::nullopt;
  if (ap.s_a < kEntryMargin || ap.s_b < kEntryMargin) return std::nullopt;
  if (a->route.total_length - ap.s_a < kExitMargin) return std::nullopt;
  if (b->route.total_length - ap.s_b < kExitMargin) return std::nullopt;
  if (!crossing_angle_ok(a->route, ap.s_a, b->route, ap.s_b)) return std::nullopt;
  return CrossDraw{std::move(*a), std::move(*b), ap.s_a, ap.s_b, ap.point};
}

// Latest step at which an agent travelling at v can still be placed on-route
// and arrive at arc s_conflict exactly then.
int max_arrival_steps(double s_conflict, double v, double dt) {
  return static_cast<int>(std::floor((s_conflict - kMinStartOffset) / (v * dt)));
}

bool footprints_clear(const Pose& pose, const std::vector<Pose>& placed, const SimParams& p) {
  for (const Pose& q : placed) {
    if (rects_overlap(pose, q, p.vehicle_length + 1.0, p.vehicle_width + 0.6)) return false;
  }
  return true;
}

}  // namespace

std::string to_string(EpisodeKind kind) {
  switch (kind) {
    case EpisodeKind::Generic:
      return "generic";
    case EpisodeKind::Collision:
      return "collision";
    case EpisodeKind::Interaction:
      return "interaction";
  }
  throw std::invalid_argument("unknown episode kind");
}

EpisodeKind episode_kind_from_string(const std::string& name) {
  if (name == "generic") return EpisodeKind::Generic;
  if (name == "collision") return EpisodeKind::Collision;
  if (name == "interaction") return EpisodeKind::Interaction;
  throw std::invalid_argument("unknown episode kind: " + name);
}

WorldState make_world(const LaneGraph& map, const EpisodeSpec& spec, const SimParams& p) {
  if (spec.agents.empty()) throw std::invalid_argument("make_world: spec has no agents");
  WorldState w;
  w.ego_id = spec.ego_id;
  int prev = std::numeric_limits<int>::min();
  bool ego_seen = false;
  for (const AgentSpec& a : spec.agents) {
    if (a.id <= prev) throw std::invalid_argument("make_world: agent ids must ascend");
    prev = a.id;
    if (a.beta < -1.0 || a.beta > 1.0) throw std::domain_error("make_world: beta outside [-1, 1]");
    AgentState st;
    st.id = a.id;
    st.beta = a.beta;
    st.route = std::make_shared<const RoutePlan>(shortest_route(map, a.spawn, a.goal));
    if (a.start_offset < 0.0 || a.start_offset > st.route->total_length)
      throw std::invalid_argument("make_world: start offset outside route");
    st.s = a.start_offset;
    st.goal = a.goal;
    w.agents.push_back(std::move(st));
    if (a.id == spec.ego_id) ego_seen = true;
  }
  if (!ego_seen) throw std::invalid_argument("make_world: ego id not among agents");
  return w;
}

EpisodeSpec gen_generic(const LaneGraph& map, int n_min, int n_max, Rng& rng,
                        const SimParams& p) {
  if (n_min < 1 || n_max < n_min) throw std::invalid_argument("gen_generic: bad agent range");
  const int n = rng.uniform_int(n_min, n_max);
  EpisodeSpec spec;
  spec.kind = EpisodeKind::Generic;
  spec.ego_id = 0;
  std::vector<Pose> placed;
  for (int id = 0; id < n; ++id) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      auto rd = draw_route(map, rng, 12.0);
      if (!rd) continue;
      const double s0 = rng.uniform(0.0, rd->route.total_length - 10.0);
      const double beta = rng.uniform(-1.0, 1.0);
      if (id == 0 && !ego_can_finish(rd->route, s0, beta, p)) continue;
      const Pose pose = rd->route.pose_at(s0);
      if (!footprints_clear(pose, placed, p)) continue;
      spec.agents.push_back({id, rd->spawn, rd->goal, s0, beta});
      placed.push_back(pose);
      ok = true;
    }
    if (!ok) throw GenerationExhausted("gen_generic: no non-overlapping placement found");
  }
  return spec;
}

EpisodeSpec gen_collision(const LaneGraph& map, Rng& rng, const SimParams& p) {
  const Policy oracle = make_oracle(OracleConfig{}, p);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto cross = draw_crossing(map, rng);
    if (!cross) continue;
    const double beta0 = rng.uniform(-1.0, 1.0);
    const double beta1 = rng.uniform(-1.0, 1.0);
    const double v0 = nominal_speed(beta0), v1 = nominal_speed(beta1);
    const int hi0 = max_arrival_steps(cross->s_a, v0, p.dt);
    if (hi0 < 8) continue;
    // The other car reaches the crossing first (or tied), so right-of-way is
    // its; an ego that barges through anyway is the collision we curate.
    const int t_other = rng.uniform_int(8, std::min(22, hi0));
    const int t_ego = t_other + rng.uniform_int(0, 3);
    if (t_ego > max_arrival_steps(cross->s_b, v1, p.dt)) continue;
    if (!ego_can_finish(cross->b.route, cross->s_b - v1 * p.dt * t_ego, beta1, p)) continue;

    EpisodeSpec spec;
    spec.kind = EpisodeKind::Collision;
    spec.ego_id = 1;
    spec.conflict_point = cross->point;
    spec.agents.push_back(
        {0, cross->a.spawn, cross->a.goal, cross->s_a - v0 * p.dt * t_other, beta0});
    spec.agents.push_back(
        {1, cross->b.spawn, cross->b.goal, cross->s_b - v1 * p.dt * t_ego, beta1});

    const WorldState w = make_world(map, spec, p);
    if (!detect_collisions(w, p).empty()) continue;
    if (run_episode(w, always_go(), oracle, p).status != EpisodeStatus::Collision) continue;
    // Stricter than the verification contract: the yielding ego must not just
    // avoid the crash but still finish, so the scene is winnable.
    if (run_episode(w, oracle, oracle, p).status != EpisodeStatus::Success) continue;
    return spec;
  }
  throw GenerationExhausted("gen_collision: no verified scene within attempt budget");
}

EpisodeSpec gen_interaction(const LaneGraph& map, int setting, Rng& rng, const SimParams& p) {
  if (setting < 1 || setting > 3)
    throw std::invalid_argument("gen_interaction: setting must be 1, 2 or 3");
  const Policy oracle = make_oracle(OracleConfig{}, p);
  struct Conflictor {
    Vec2 spawn;
    Vec2 goal;
    const RoutePlan* route;
    double s_star;
    double beta;
  };
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto cross = draw_crossing(map, rng);
    if (!cross) continue;
    const Vec2 point = cross->point;

    std::vector<Conflictor> conflictors;
    conflictors.push_back({cross->a.spawn, cross->a.goal, &cross->a.route, cross->s_a,
                           rng.uniform(-1.0, 1.0)});
    conflictors.push_back({cross->b.spawn, cross->b.goal, &cross->b.route, cross->s_b,
                           rng.uniform(-1.0, 1.0)});

    std::optional<RouteDraw> third;
    if (setting == 3) {
      for (int extra = 0; extra < 40 && !third; ++extra) {
        auto c = draw_route(map, rng, kMinRouteLen);
        if (!c) continue;
        const Approach ca = closest_approach(c->route, *conflictors[0].route);
        const Approach cb = closest_approach(c->route, *conflictors[1].route);
        if (!(ca.dist < kCrossDistMax) || !(cb.dist < kCrossDistMax)) continue;
        if (dist(ca.point, point) > kClusterRadius) continue;
        if (dist(cb.point, point) > kClusterRadius) continue;
        if (!crossing_angle_ok(c->route, ca.s_a, *conflictors[0].route, ca.s_b)) continue;
        if (!crossing_angle_ok(c->route, cb.s_a, *conflictors[1].route, cb.s_b)) continue;
        const double s2 = arc_nearest(c->route, point);
        if (s2 < kEntryMargin || c->route.total_length - s2 < kExitMargin) continue;
        third = std::move(*c);
        conflictors.push_back(
            {third->spawn, third->goal, &third->route, s2, rng.uniform(-1.0, 1.0)});
      }
      if (!third) continue;
    }

    // Nominal shared arrival step, leaving jitter room on every route.
    int t_hi = kArrivalHi;
    for (const Conflictor& c : conflictors) {
      const double v = nominal_speed(c.beta);
      t_hi = std::min(t_hi, max_arrival_steps(c.s_star, v, p.dt) - kJitterMax);
    }
    if (t_hi < kArrivalLo) continue;
    const int t_shared = rng.uniform_int(kArrivalLo, t_hi);

    std::vector<int> jitter(conflictors.size(), 0);
    bool jitter_ok = false;
    for (int tries = 0; tries < 60 && !jitter_ok; ++tries) {
      for (int& j : jitter) j = rng.uniform_int(-kJitterMax, kJitterMax);
      jitter_ok = true;
      for (size_t i = 0; i < jitter.size() && jitter_ok; ++i)
        for (size_t j = i + 1; j < jitter.size(); ++j)
          if (std::abs(jitter[i] - jitter[j]) > kWindowMax) {
            jitter_ok = false;
            break;
          }
    }
    if (!jitter_ok) continue;

    EpisodeSpec spec;
    spec.kind = EpisodeKind::Interaction;
    spec.setting = setting;
    spec.ego_id = 1;
    spec.conflict_point = point;
    spec.arrival_jitter = jitter;
    bool placed_ok = true;
    for (size_t i = 0; i < conflictors.size(); ++i) {
      const Conflictor& c = conflictors[i];
      const double v = nominal_speed(c.beta);
      const double s0 = c.s_star - v * p.dt * (t_shared + jitter[i]);
      if (s0 < kMinStartOffset) {
        placed_ok = false;
        break;
      }
      spec.agents.push_back({static_cast<int>(i), c.spawn, c.goal, s0, c.beta});
    }
    if (!placed_ok) continue;
    if (!ego_can_finish(*conflictors[1].route, spec.agents[1].start_offset,
                        conflictors[1].beta, p))
      continue;

    if (setting == 2) {
      // A follower planted behind the ego at exactly the braking trigger gap.
      const double centre_gap = p.vehicle_length + CarFollowerConfig{}.min_gap;
      const double s0 = spec.agents[1].start_offset - centre_gap;
      if (s0 < kMinStartOffset) continue;
      spec.agents.push_back(
          {2, spec.agents[1].spawn, spec.agents[1].goal, s0, rng.uniform(-1.0, 1.0)});
    }

    const WorldState w = make_world(map, spec, p);
    if (!detect_collisions(w, p).empty()) continue;
    if (arrival_window(map, spec, p) > kWindowMax) continue;
    // Keep only scenes the rule-based planners can actually negotiate:
    // tight three-way arrivals can otherwise gridlock into a circular wait.
    if (run_episode(w, oracle, oracle, p).status != EpisodeStatus::Success) continue;
    return spec;
  }
  throw GenerationExhausted("gen_interaction: no admissible scene within attempt budget");
}

int arrival_window(const LaneGraph& map, const EpisodeSpec& spec, const SimParams& p) {
  if (!spec.conflict_point)
    throw std::invalid_argument("arrival_window: spec has no conflict point");
  const Vec2 point = *spec.conflict_point;
  const size_t n_conf =
      (spec.kind == EpisodeKind::Interaction && spec.setting == 3) ? 3 : 2;
  if (spec.agents.size() < n_conf)
    throw std::invalid_argument("arrival_window: too few agents for the conflict");
  std::vector<int> arrivals;
  for (size_t k = 0; k < n_conf; ++k) {
    const AgentSpec& a = spec.agents[k];
    const RoutePlan route = shortest_route(map, a.spawn, a.goal);
    const double v = nominal_speed(a.beta);
    const int t_cap = std::min(
        2 * p.t_max,
        static_cast<int>(std::ceil((route.total_length - a.start_offset) / (v * p.dt))) + 1);
    int best_t = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= t_cap; ++t) {
      const double s = std::min(a.start_offset + v * p.dt * t, route.total_length);
      const double d = dist(route.pose_at(s).pos, point);
      if (d < best_d) {
        best_d = d;
        best_t = t;
      }
    }
    arrivals.push_back(best_t);
  }
  int window = 0;
  for (size_t i = 0; i < arrivals.size(); ++i)
    for (size_t j = i + 1; j < arrivals.size(); ++j)
      window = std::max(window, std::abs(arrivals[i] - arrivals[j]));
  return window;
}

bool verify_collision_spec(const LaneGraph& map, const EpisodeSpec& spec, const SimParams& p) {
  const WorldState w = make_world(map, spec, p);
  const Policy oracle = make_oracle(OracleConfig{}, p);
  const EpisodeResult forced = run_episode(w, always_go(), oracle, p);
  if (forced.status != EpisodeStatus::Collision) return false;
  const EpisodeResult yielding = run_episode(w, oracle, oracle, p);
  return yielding.status != EpisodeStatus::Collision;
}

DatasetCounts DatasetCounts::scaled(double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("DatasetCounts: factor must be positive");
  const DatasetCounts full;
  const auto s = [&](int v) {
    return std::max(1, static_cast<int>(std::lround(v * factor)));
  };
  DatasetCounts c;
  c.train = s(full.train);
  c.val_generic = s(full.val_generic);
  c.val_interaction = s(full.val_interaction);
  c.test_generic = s(full.test_generic);
  c.test_interaction = s(full.test_interaction);
  c.interaction_pool = s(full.interaction_pool);
  c.test_interaction_draw = std::min(s(full.test_interaction_draw), c.interaction_pool);
  return c;
}

std::vector<const EpisodeSpec*> DatasetManifest::split(const std::string& name) const {
  std::vector<const EpisodeSpec*> out;
  for (const ManifestEntry& e : entries)
    if (e.split == name) out.push_back(&e.spec);
  return out;
}

std::vector<std::string> DatasetManifest::split_names() const {
  std::vector<std::string> out;
  for (const ManifestEntry& e : entries)
    if (std::find(out.begin(), out.end(), e.split) == out.end()) out.push_back(e.split);
  return out;
}

namespace {

using nlohmann::ordered_json;

ordered_json vec_json(Vec2 v) { return ordered_json::array({v.x, v.y}); }

Vec2 vec_from_json(const ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("manifest: bad coordinate pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

ordered_json entry_json(const ManifestEntry& e) {
  const EpisodeSpec& s = e.spec;
  ordered_json j;
  j["split"] = e.split;
  j["kind"] = to_string(s.kind);
  j["setting"] = s.setting;
  j["ego_id"] = s.ego_id;
  j["seed"] = s.seed;
  if (s.conflict_point)
    j["conflict_point"] = vec_json(*s.conflict_point);
  else
    j["conflict_point"] = nullptr;
  j["arrival_jitter"] = s.arrival_jitter;
  ordered_json agents = ordered_json::array();
  for (const AgentSpec& a : s.agents) {
    ordered_json aj;
    aj["id"] = a.id;
    aj["spawn"] = vec_json(a.spawn);
    aj["goal"] = vec_json(a.goal);
    aj["start_offset"] = a.start_offset;
    aj["beta"] = a.beta;
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  return j;
}

ManifestEntry entry_from_json(const ordered_json& j) {
  ManifestEntry e;
  e.split = j.at("split").get<std::string>();
  e.spec.kind = episode_kind_from_string(j.at("kind").get<std::string>());
  e.spec.setting = j.at("setting").get<int>();
  e.spec.ego_id = j.at("ego_id").get<int>();
  e.spec.seed = j.at("seed").get<uint64_t>();
  if (!j.at("conflict_point").is_null())
    e.spec.conflict_point = vec_from_json(j.at("conflict_point"));
  e.spec.arrival_jitter = j.at("arrival_jitter").get<std::vector<int>>();
  for (const auto& aj : j.at("agents")) {
    AgentSpec a;
    a.id = aj.at("id").get<int>();
    a.spawn = vec_from_json(aj.at("spawn"));
    a.goal = vec_from_json(aj.at("goal"));
    a.start_offset = aj.at("start_offset").get<double>();
    a.beta = aj.at("beta").get<double>();
    e.spec.agents.push_back(a);
  }
  return e;
}

ordered_json manifest_body(const DatasetManifest& m) {
  ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = m.seed;
  j["scale"] = m.scale;
  ordered_json eps = ordered_json::array();
  for (const ManifestEntry& e : m.entries) eps.push_back(entry_json(e));
  j["episodes"] = std::move(eps);
  return j;
}

}  // namespace

uint64_t manifest_hash(const DatasetManifest& manifest) {
  return fnv1a64(manifest_body(manifest).dump());
}

DatasetManifest build_datasets(const LaneGraph& map, const DatasetCounts& counts, uint64_t seed,
                               double scale_label, const SimParams& p) {
  DatasetManifest m;
  m.seed = seed;
  m.scale = scale_label;
  uint64_t counter = 0;
  const auto derive = [&]() { return mix_seed(seed, counter++); };
  const auto push = [&](const std::string& split, EpisodeSpec spec, uint64_t spec_seed) {
    spec.seed = spec_seed;
    m.entries.push_back({split, std::move(spec)});
  };

  const int n_generic = static_cast<int>(std::lround(counts.train * 0.25));
  const int n_collision = static_cast<int>(std::lround(counts.train * 0.25));
  const int n_interaction = counts.train - n_generic - n_collision;

  for (int i = 0; i < n_generic; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("train", gen_generic(map, 2, 25, rng, p), s);
  }
  for (int i = 0; i < n_collision; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("train", gen_collision(map, rng, p), s);
  }
  for (int i = 0; i < n_interaction; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("train", gen_interaction(map, 1 + i % 3, rng, p), s);
  }

  for (int i = 0; i < counts.val_generic; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("val", gen_generic(map, 2, 25, rng, p), s);
  }
  for (int i = 0; i < counts.val_interaction; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("val", gen_interaction(map, 1 + i % 3, rng, p), s);
  }

  for (int i = 0; i < counts.test_generic; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("test", gen_generic(map, 2, 25, rng, p), s);
  }
  for (int i = 0; i < counts.test_interaction; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    push("test", gen_interaction(map, 1 + i % 3, rng, p), s);
  }

  // Hard-interaction benchmark: a wide pool, then a stratified draw that keeps
  // the three settings equally represented.
  std::vector<std::pair<uint64_t, EpisodeSpec>> pool;
  pool.reserve(counts.interaction_pool);
  for (int i = 0; i < counts.interaction_pool; ++i) {
    const uint64_t s = derive();
    Rng rng(s);
    pool.emplace_back(s, gen_interaction(map, 1 + i % 3, rng, p));
  }
  Rng draw_rng(mix_seed(seed, 0x7e57d4a0ULL));
  const int want = std::min(counts.test_interaction_draw, counts.interaction_pool);
  const int base = want / 3, rem = want % 3;
  for (int setting = 1; setting <= 3; ++setting) {
    std::vector<int> idx;
    for (size_t i = 0; i < pool.size(); ++i)
      if (pool[i].second.setting == setting) idx.push_back(static_cast<int>(i));
    int take = base + (setting <= rem ? 1 : 0);
    take = std::min<int>(take, static_cast<int>(idx.size()));
    for (int i = 0; i < take; ++i) {
      const int j = draw_rng.uniform_int(i, static_cast<int>(idx.size()) - 1);
      std::swap(idx[i], idx[j]);
      auto& picked = pool[idx[i]];
      push("test-interaction", std::move(picked.second), picked.first);
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  ordered_json body = manifest_body(manifest);
  const uint64_t hash = fnv1a64(body.dump());
  ordered_json out;
  out["schema_version"] = body["schema_version"];
  out["seed"] = body["seed"];
  out["scale"] = body["scale"];
  out["content_hash"] = hex64(hash);
  out["episodes"] = std::move(body["episodes"]);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << out.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest parse failure: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    if (j.at("schema_version").get<int>() != 1)
      throw std::runtime_error("manifest: unsupported schema version");
    m.seed = j.at("seed").get<uint64_t>();
    m.scale = j.at("scale").get<double>();
    for (const auto& ej : j.at("episodes")) m.entries.push_back(entry_from_json(ej));
    const std::string stored = j.at("content_hash").get<std::string>();
    if (stored != hex64(manifest_hash(m)))
      throw std::runtime_error("manifest content hash mismatch: " + path);
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest field error: " + std::string(e.what()));
  }
  return m;
}

}  // namespace crossway
