#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crossway/episodes.hpp"
#include "crossway/eval.hpp"
#include "crossway/lane_graph.hpp"
#include "crossway/nets.hpp"
#include "crossway/planners.hpp"
#include "crossway/textio.hpp"
#include "crossway/train.hpp"

namespace {

using namespace crossway;

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::string token;
  for (char c : text + ",") {
    if (c == ',') {
      if (!token.empty()) seeds.push_back(std::stoull(token));
      token.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
    }
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list: '" + text + "'");
  return seeds;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::string token;
  for (char c : text + ",") {
    if (c == ',') {
      if (!token.empty()) values.push_back(std::stod(token));
      token.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
    }
  }
  if (values.empty()) throw std::invalid_argument("empty value list: '" + text + "'");
  return values;
}

ArchKind arch_from_name(const std::string& name) {
  if (name == "mlp") return ArchKind::MLP;
  if (name == "deepset") return ArchKind::DeepSet;
  if (name == "socialattn") return ArchKind::SocialAttention;
  if (name == "midas") return ArchKind::MIDAS;
  throw std::invalid_argument("unknown architecture: " + name);
}

std::string arch_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::MLP: return "mlp";
    case ArchKind::DeepSet: return "deepset";
    case ArchKind::SocialAttention: return "socialattn";
    case ArchKind::MIDAS: return "midas";
  }
  return "?";
}

// The ego controller named on the command line: a rule planner by name or a
// checkpoint path for a trained network.
Policy resolve_policy(const std::string& builtin, const std::string& checkpoint_path,
                      const SimParams& p) {
  if (!checkpoint_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    return checkpoint_policy(ckpt.spec, ckpt.params, p);
  }
  if (builtin == "oracle") return make_oracle({}, p);
  if (builtin == "car-follower") return make_car_follower({}, p);
  if (builtin == "always-go") return always_go();
  if (builtin == "always-stop") return always_stop();
  throw std::invalid_argument("unknown policy: " + builtin +
                              " (expected oracle, car-follower, always-go, always-stop, or a "
                              "--checkpoint path)");
}

std::vector<const EpisodeSpec*> split_or_throw(const DatasetManifest& manifest,
                                               const std::string& name) {
  const std::vector<const EpisodeSpec*> split = manifest.split(name);
  if (split.empty()) {
    std::string known;
    for (const std::string& n : manifest.split_names()) known += " " + n;
    throw std::invalid_argument("split '" + name + "' is empty or unknown; manifest has:" + known);
  }
  return split;
}

std::vector<const EpisodeSpec*> filter_setting(const std::vector<const EpisodeSpec*>& split,
                                               int setting) {
  if (setting <= 0) return split;
  std::vector<const EpisodeSpec*> out;
  for (const EpisodeSpec* s : split) {
    if (s->kind == EpisodeKind::Interaction && s->setting == setting) out.push_back(s);
  }
  return out;
}

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void print_metrics_line(const char* tag, const MetricsReport& m) {
  std::printf("%s: episodes %d  time-to-finish %.2f  collision %.2f%%  timeout %.2f%%  "
              "success %.2f%%\n",
              tag, m.episodes, m.time_to_finish, m.collision_pct, m.timeout_pct, m.success_pct);
}

int run_data_generate(const std::string& manifest_path, uint64_t seed, double scale) {
  const LaneGraph map = build_default_map();
  const DatasetCounts counts = DatasetCounts::scaled(scale);
  std::printf("generating datasets: seed %llu scale %g (train %d, val %d+%d, test %d+%d, "
              "pool %d -> draw %d)\n",
              static_cast<unsigned long long>(seed), scale, counts.train, counts.val_generic,
              counts.val_interaction, counts.test_generic, counts.test_interaction,
              counts.interaction_pool, counts.test_interaction_draw);
  const DatasetManifest manifest = build_datasets(map, counts, seed, scale);
  const std::filesystem::path parent = std::filesystem::path(manifest_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  save_manifest(manifest, manifest_path);
  std::printf("wrote %s: %zu episodes, content hash %s\n", manifest_path.c_str(),
              manifest.entries.size(), hex64(manifest_hash(manifest)).c_str());
  for (const std::string& name : manifest.split_names()) {
    std::printf("  split %-17s %zu episodes\n", name.c_str(), manifest.split(name).size());
  }
  return 0;
}

int run_train(const std::string& arch, const std::string& config_path, const std::string& out_dir) {
  const Config cfg_file = Config::from_file(config_path);
  TrainConfig cfg;
  cfg.gamma = cfg_file.get_double("gamma", cfg.gamma);
  cfg.batch_size = cfg_file.get_int("batch_size", cfg.batch_size);
  cfg.lr = cfg_file.get_double("lr", cfg.lr);
  cfg.lag_period = cfg_file.get_int("lag_period", cfg.lag_period);
  cfg.lag_tau = cfg_file.get_double("lag_tau", cfg.lag_tau);
  cfg.grad_clip = cfg_file.get_double("grad_clip", cfg.grad_clip);
  cfg.epsilon_floor = cfg_file.get_double("epsilon_floor", cfg.epsilon_floor);
  cfg.epsilon_horizon = cfg_file.get_int("epsilon_horizon", cfg.epsilon_horizon);
  cfg.replay_capacity =
      static_cast<std::size_t>(cfg_file.get_u64("replay_capacity", cfg.replay_capacity));
  cfg.episodes = cfg_file.get_int("episodes", cfg.episodes);
  cfg.val_period = cfg_file.get_int("val_period", cfg.val_period);
  cfg.seed = cfg_file.get_u64("seed", cfg.seed);
  const std::string manifest_path = cfg_file.get_string("manifest", "");
  if (manifest_path.empty()) throw std::invalid_argument("config is missing manifest=<path>");
  const int val_cap = cfg_file.get_int("val_episodes", 0);

  const LaneGraph map = build_default_map();
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<const EpisodeSpec*> train_split = split_or_throw(manifest, "train");
  std::vector<const EpisodeSpec*> val_split = split_or_throw(manifest, "val");
  if (val_cap > 0 && static_cast<std::size_t>(val_cap) < val_split.size())
    val_split.resize(static_cast<std::size_t>(val_cap));

  const ArchSpec spec{arch_from_name(arch)};
  std::filesystem::create_directories(out_dir);
  std::printf("training %s: seed %llu, %d episodes, %zu train / %zu val episodes\n",
              arch.c_str(), static_cast<unsigned long long>(cfg.seed),
              cfg.episodes > 0 ? cfg.episodes : static_cast<int>(train_split.size()),
              train_split.size(), val_split.size());
  std::fflush(stdout);

  const auto progress = [](const CurveRow& row) {
    if (row.val) {
      std::printf("episode %4d  env steps %7ld  mean reward %8.3f  loss %9.5f  "
                  "val success %.1f%% collision %.1f%% timeout %.1f%%\n",
                  row.episode, row.env_steps, row.mean_reward, row.loss, row.val->success,
                  row.val->collision, row.val->timeout);
    } else if (row.episode % 10 == 0) {
      std::printf("episode %4d  env steps %7ld  mean reward %8.3f  loss %9.5f\n", row.episode,
                  row.env_steps, row.mean_reward, row.loss);
    }
    std::fflush(stdout);
  };

  const TrainResult result = train(map, spec, cfg, train_split, val_split, {}, progress);

  write_curve_csv(result, join_path(out_dir, "curve.csv"));
  save_checkpoint(join_path(out_dir, "untrained.ckpt"), result.untrained);
  save_checkpoint(join_path(out_dir, "trained.ckpt"), result.trained);

  nlohmann::ordered_json summary;
  summary["arch"] = arch;
  summary["seed"] = cfg.seed;
  summary["episodes"] = static_cast<int>(result.curve.size()) - 1;
  summary["env_steps"] = result.curve.back().env_steps;
  summary["gradient_steps_at_selection"] = result.trained.step;
  summary["untrained_val"] = {{"success", result.untrained_val.success},
                              {"collision", result.untrained_val.collision},
                              {"timeout", result.untrained_val.timeout},
                              {"mean_return", result.untrained_val.mean_return}};
  summary["trained_val"] = {{"success", result.trained_val.success},
                            {"collision", result.trained_val.collision},
                            {"timeout", result.trained_val.timeout},
                            {"mean_return", result.trained_val.mean_return}};
  summary["val_success_gain"] = result.trained_val.success - result.untrained_val.success;
  write_json(summary, join_path(out_dir, "summary.json"));

  std::printf("done: untrained success %.1f%% -> selected %.1f%% (gain %.1f points)\n",
              result.untrained_val.success, result.trained_val.success,
              result.trained_val.success - result.untrained_val.success);
  std::printf("artifacts: %s\n", out_dir.c_str());
  return 0;
}

int run_eval(const std::string& manifest_path, const std::string& split_name,
             const std::string& policy_name, const std::string& checkpoint_path,
             const std::string& seeds_text, double noise_p, const std::string& out_dir) {
  const LaneGraph map = build_default_map();
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<const EpisodeSpec*> split = split_or_throw(manifest, split_name);
  const std::vector<uint64_t> seeds = parse_seed_list(seeds_text);
  const SimParams p;
  const Policy ego = resolve_policy(policy_name, checkpoint_path, p);

  const MetricsReport report =
      evaluate(map, split, [&](uint64_t) { return ego; }, seeds, noise_p, p);

  std::filesystem::create_directories(out_dir);
  write_metrics_csv(report, join_path(out_dir, "metrics.csv"));
  nlohmann::ordered_json summary = metrics_json(report);
  summary["split"] = split_name;
  summary["policy"] = checkpoint_path.empty() ? policy_name : checkpoint_path;
  summary["noise_p"] = noise_p;
  write_json(summary, join_path(out_dir, "metrics.json"));
  print_metrics_line("result", report);
  std::printf("artifacts: %s\n", out_dir.c_str());
  return 0;
}

struct AnalyzeArgs {
  std::string manifest;
  std::string split = "test-interaction";
  std::string out_dir = ".";
  std::string policy = "oracle";
  std::string checkpoint;
  std::string policy_b = "oracle";
  std::string checkpoint_b;
  std::string probe_policy = "oracle";
  std::string probe_checkpoint;
  std::string name_a = "policy_a";
  std::string name_b = "policy_b";
  std::string betas = "-1,-0.5,0,0.5,1";
  std::string seeds = "1,2,3,4";
  double offset_min = -2.0;
  double offset_max = 2.0;
  double offset_step = 0.1;
  double threshold = 1.0;
  int setting = 0;
};

int run_analyze(const std::string& kind, const AnalyzeArgs& args) {
  const LaneGraph map = build_default_map();
  const DatasetManifest manifest = load_manifest(args.manifest);
  const SimParams p;
  std::filesystem::create_directories(args.out_dir);

  AnalysisRecord rec;
  if (kind == "perturbation") {
    // Arrival perturbation needs plain two-agent crossings.
    std::vector<const EpisodeSpec*> scenes =
        filter_setting(split_or_throw(manifest, args.split), 1);
    if (scenes.empty())
      throw std::invalid_argument("split has no two-agent crossing scenes (setting 1)");
    std::vector<double> offsets;
    for (double t = args.offset_min; t <= args.offset_max + 1e-9; t += args.offset_step)
      offsets.push_back(t);
    rec = perturbation_study(map, scenes, resolve_policy(args.policy, args.checkpoint, p),
                             offsets, p);
  } else if (kind == "minttc") {
    rec = min_ttc_study(map, split_or_throw(manifest, args.split), args.name_a,
                        resolve_policy(args.policy, args.checkpoint, p), args.name_b,
                        resolve_policy(args.policy_b, args.checkpoint_b, p), p);
  } else if (kind == "counterfactual") {
    std::vector<const EpisodeSpec*> split = split_or_throw(manifest, args.split);
    const std::vector<const EpisodeSpec*> filtered = filter_setting(split, args.setting);
    if (filtered.empty()) throw std::invalid_argument("no episodes left after setting filter");
    rec = counterfactual_log(map, filtered, resolve_policy(args.policy, args.checkpoint, p),
                             resolve_policy(args.probe_policy, args.probe_checkpoint, p),
                             args.threshold, p);
  } else if (kind == "sweep") {
    const Policy ego = resolve_policy(args.policy, args.checkpoint, p);
    rec = driver_type_sweep(map, split_or_throw(manifest, args.split),
                            [&](double) { return ego; }, parse_double_list(args.betas),
                            parse_seed_list(args.seeds), p);
  } else if (kind == "density") {
    rec = density_analysis(map, split_or_throw(manifest, args.split),
                           resolve_policy(args.policy, args.checkpoint, p), p);
  } else {
    throw std::invalid_argument("unknown analysis: " + kind);
  }

  rec.summary["split"] = args.split;
  const std::string csv_path = join_path(args.out_dir, kind + ".csv");
  write_analysis_csv(rec, csv_path);
  write_json(rec.summary, join_path(args.out_dir, kind + ".json"));
  std::printf("%s: %zu rows -> %s\n", kind.c_str(), rec.rows.size(), csv_path.c_str());
  std::printf("summary: %s\n", rec.summary.dump().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossway: multi-agent driving simulator and learning stack"};
  app.require_subcommand(1);

  auto* map_cmd = app.add_subcommand("map", "map utilities");
  map_cmd->require_subcommand(1);
  std::string map_path;
  auto* map_validate = map_cmd->add_subcommand("validate", "check map structure");
  map_validate->add_option("--map", map_path, "map file (default: bundled map)");

  auto* data_cmd = app.add_subcommand("data", "dataset utilities");
  data_cmd->require_subcommand(1);
  std::string gen_manifest = "artifacts/manifest.json";
  uint64_t gen_seed = 1;
  double gen_scale = 1.0;
  auto* data_generate = data_cmd->add_subcommand("generate", "curate episode datasets");
  data_generate->add_option("--manifest", gen_manifest, "output manifest path");
  data_generate->add_option("--seed", gen_seed, "generation seed");
  data_generate->add_option("--scale", gen_scale, "dataset size factor (1 = full)");

  std::string train_arch = "midas";
  std::string train_config;
  std::string train_out = "artifacts/run";
  auto* train_cmd = app.add_subcommand("train", "train a value network");
  train_cmd->add_option("--arch", train_arch, "mlp|deepset|socialattn|midas");
  train_cmd->add_option("--config", train_config, "key=value config file")->required();
  train_cmd->add_option("--out", train_out, "output directory");

  std::string eval_manifest, eval_split = "test-interaction", eval_policy = "oracle";
  std::string eval_checkpoint, eval_seeds = "1,2,3,4", eval_out = "artifacts/eval";
  double eval_noise = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy on a split");
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  eval_cmd->add_option("--split", eval_split, "manifest split name");
  eval_cmd->add_option("--policy", eval_policy,
                       "oracle|car-follower|always-go|always-stop (ignored with --checkpoint)");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "trained network checkpoint");
  eval_cmd->add_option("--seeds", eval_seeds, "comma-separated evaluation seeds");
  eval_cmd->add_option("--noise-p", eval_noise, "Bernoulli action noise on other agents");
  eval_cmd->add_option("--out", eval_out, "output directory");

  auto* analyze_cmd = app.add_subcommand("analyze", "behavioral analyses");
  analyze_cmd->require_subcommand(1);
  AnalyzeArgs an;
  std::vector<CLI::App*> analyze_subs;
  for (const char* kind : {"perturbation", "minttc", "counterfactual", "sweep", "density"}) {
    auto* sub = analyze_cmd->add_subcommand(kind, std::string("run the ") + kind + " analysis");
    sub->add_option("--manifest", an.manifest, "dataset manifest")->required();
    sub->add_option("--split", an.split, "manifest split name");
    sub->add_option("--out", an.out_dir, "output directory");
    sub->add_option("--policy", an.policy, "ego rule planner name");
    sub->add_option("--checkpoint", an.checkpoint, "ego checkpoint (overrides --policy)");
    analyze_subs.push_back(sub);
  }
  analyze_subs[0]->add_option("--offset-min", an.offset_min, "offset grid start, seconds");
  analyze_subs[0]->add_option("--offset-max", an.offset_max, "offset grid end, seconds");
  analyze_subs[0]->add_option("--offset-step", an.offset_step, "offset grid spacing, seconds");
  analyze_subs[1]->add_option("--name-a", an.name_a, "label for the first policy");
  analyze_subs[1]->add_option("--name-b", an.name_b, "label for the second policy");
  analyze_subs[1]->add_option("--policy-b", an.policy_b, "second rule planner name");
  analyze_subs[1]->add_option("--checkpoint-b", an.checkpoint_b, "second checkpoint");
  analyze_subs[2]->add_option("--probe-policy", an.probe_policy, "probe rule planner name");
  analyze_subs[2]->add_option("--probe-checkpoint", an.probe_checkpoint, "probe checkpoint");
  analyze_subs[2]->add_option("--threshold", an.threshold, "TTC flag threshold, seconds");
  analyze_subs[2]->add_option("--setting", an.setting, "restrict to one interaction setting");
  analyze_subs[3]->add_option("--betas", an.betas, "comma-separated driver types");
  analyze_subs[3]->add_option("--seeds", an.seeds, "comma-separated evaluation seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_validate->parsed()) {
      const crossway::LaneGraph g =
          map_path.empty() ? crossway::build_default_map() : crossway::load_map(map_path);
      const auto problems = crossway::validate_map(g);
      std::printf("segments: %zu  junctions: %zu  spawns: %zu\n", g.segments.size(),
                  g.junctions.size(), g.spawns.size());
      for (const auto& prob : problems) std::printf("PROBLEM: %s\n", prob.c_str());
      std::printf(problems.empty() ? "map OK\n" : "map INVALID\n");
      return problems.empty() ? 0 : 1;
    }
    if (data_generate->parsed()) return run_data_generate(gen_manifest, gen_seed, gen_scale);
    if (train_cmd->parsed()) return run_train(train_arch, train_config, train_out);
    if (eval_cmd->parsed())
      return run_eval(eval_manifest, eval_split, eval_policy, eval_checkpoint, eval_seeds,
                      eval_noise, eval_out);
    if (analyze_cmd->parsed()) {
      for (std::size_t i = 0; i < analyze_subs.size(); ++i) {
        if (analyze_subs[i]->parsed()) {
          static const char* kinds[] = {"perturbation", "minttc", "counterfactual", "sweep",
                                        "density"};
          return run_analyze(kinds[i], an);
        }
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
