#pragma once

// Command-line front end. Subcommands:
//
//   train         --config FILE [--override k=v]... --run-dir DIR [--resume]
//   eval          --checkpoint FILE [--config FILE] [--override k=v]... --out DIR
//                 [--themes a,b] [--seeds list] [--repetitions N] [--greedy]
//   render-paths  --run-dir DIR [--update N] [--episode ID]... [--out DIR]
//   bench         [--config FILE] [--override k=v]... [--episodes N] [--seed S] [--out FILE]
//
// Exit codes: 0 success, 1 runtime failure (I/O, numerical), 2 invalid
// input (command line, configuration, missing or malformed files).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "towerlab/config/run_config.hpp"
#include "towerlab/env/bench.hpp"
#include "towerlab/env/recording.hpp"
#include "towerlab/eval/curves.hpp"
#include "towerlab/eval/histogram.hpp"
#include "towerlab/eval/path_render.hpp"
#include "towerlab/ppo/train.hpp"

namespace towerlab::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string run_dir;
  bool resume = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string themes, seeds;
  int repetitions = 0;
  bool greedy = false;
};

struct RenderArgs {
  std::string run_dir;
  int update = -1;
  std::vector<int> episodes;
  std::string out;
};

struct BenchArgs {
  std::string config;
  std::vector<std::string> overrides;
  int episodes = 100;
  std::uint64_t seed = 0;
  std::string out = "bench.csv";
};

inline config::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) {
    auto a = config::parse_overrides(overrides);
    return config::resolve(a);
  }
  if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
  return config::load(path, overrides);
}

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config, a.overrides);
  const fs::path dir(a.run_dir);
  if (!a.resume && fs::exists(dir / "stats.csv"))
    throw ConfigError("run directory '" + a.run_dir + "' already holds a run; pass --resume or choose another directory");
  ppo::TrainOptions opt;
  opt.resume = a.resume;
  const int total = cfg.ppo.total_updates;
  opt.on_update = [&](const ppo::TrainStats& s) {
    if (s.update % 10 == 0 || s.update == total) {
      char b[160];
      if (s.episodes > 0)
        std::snprintf(b, sizeof b, "update %d/%d  return %.3f  floor %.3f  entropy %.4f  episodes %d\n", s.update, total,
                      s.mean_return, s.mean_floor, s.entropy, s.episodes);
      else
        std::snprintf(b, sizeof b, "update %d/%d  entropy %.4f  episodes 0\n", s.update, total, s.entropy);
      out << b << std::flush;
    }
  };
  opt.on_eval = [&](const eval::EvalReport& r) {
    out << "eval update " << r.update << "  mean floor " << eval::fmt_num(r.mean_floor(cfg.eval.themes)) << '\n';
  };
  const int done = ppo::train(cfg, dir, opt);
  out << "completed " << done << " updates in " << dir.string() << '\n';
  return kExitOk;
}

// Update number encoded in a checkpoint file name, or 0.
inline int checkpoint_update(const fs::path& p) {
  const auto stem = p.stem().string();
  const auto pos = stem.find_last_of('_');
  if (pos == std::string::npos) return 0;
  try {
    return std::stoi(stem.substr(pos + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path ckpt(a.checkpoint);
  if (!fs::is_regular_file(ckpt)) throw ConfigError("checkpoint '" + a.checkpoint + "' does not exist");
  auto cfg_path = a.config;
  if (cfg_path.empty()) {
    // Checkpoints live in <run>/checkpoints; the run's resolved config sits beside them.
    const auto beside = ckpt.parent_path().parent_path() / "config.ini";
    if (fs::exists(beside)) cfg_path = beside.string();
  }
  auto overrides = a.overrides;
  if (!a.themes.empty()) overrides.push_back("eval.themes=" + a.themes);
  if (!a.seeds.empty()) overrides.push_back("eval.seeds=" + a.seeds);
  if (a.repetitions > 0) overrides.push_back("eval.repetitions=" + std::to_string(a.repetitions));
  if (a.greedy) overrides.push_back("eval.greedy=true");
  const auto cfg = load_config(cfg_path, overrides);
  // Load once up front so a bad checkpoint leaves no partial output.
  {
    model::AgentModel<float> probe(cfg.model_config());
    nn::load_checkpoint(ckpt.string(), probe.parameters());
  }
  const fs::path dir(a.out);
  const auto rep = ppo::evaluate_checkpoint(ckpt, cfg, dir, checkpoint_update(ckpt));
  const std::vector<eval::EvalReport> reps{rep};
  const auto pts = eval::curve_points(reps);
  eval::write_curves_csv((dir / "curves.csv").string(), pts);
  eval::write_ppm((dir / "curves.ppm").string(), eval::curves_image(pts));
  const auto h = eval::termination_histogram(reps, cfg.train_themes, cfg.env.floor_cap);
  eval::write_histogram_csv((dir / "histogram.csv").string(), h);
  eval::write_ppm((dir / "histogram.ppm").string(), eval::histogram_image(h));
  out << rep.rows.size() << " episodes written to " << dir.string() << '\n';
  for (const auto& g : rep.aggregates())
    out << env::theme_name(g.theme) << "  mean floor " << eval::fmt_num(g.mean_floor) << "  mean length "
        << eval::fmt_num(g.mean_length) << '\n';
  return kExitOk;
}

inline int latest_eval_update(const fs::path& run_dir) {
  int best = -1;
  if (fs::exists(run_dir / "eval"))
    for (const auto& e : fs::directory_iterator(run_dir / "eval")) {
      const auto name = e.path().filename().string();
      if (e.is_directory() && name.rfind("update_", 0) == 0) best = std::max(best, std::stoi(name.substr(7)));
    }
  return best;
}

inline int cmd_render_paths(const RenderArgs& a, std::ostream& out) {
  const fs::path run(a.run_dir);
  if (!fs::exists(run / "config.ini")) throw ConfigError("'" + a.run_dir + "' is not a run directory (no config.ini)");
  const auto cfg = config::load((run / "config.ini").string());
  const int update = a.update >= 0 ? a.update : latest_eval_update(run);
  if (update < 0) throw ConfigError("run directory has no evaluation reports");
  const auto rec_dir = ppo::eval_dir(run, update) / "recordings";
  if (!fs::exists(rec_dir)) throw ConfigError("no recordings for update " + std::to_string(update));
  std::vector<std::pair<int, fs::path>> selected;
  for (const auto& e : fs::directory_iterator(rec_dir)) {
    const auto stem = e.path().stem().string();
    if (e.path().extension() != ".tlep" || stem.rfind("episode_", 0) != 0) continue;
    const int id = std::stoi(stem.substr(8));
    if (a.episodes.empty() || std::find(a.episodes.begin(), a.episodes.end(), id) != a.episodes.end())
      selected.emplace_back(id, e.path());
  }
  if (selected.empty()) throw ConfigError("episode selector matched no recordings for update " + std::to_string(update));
  std::sort(selected.begin(), selected.end());
  const fs::path dir = a.out.empty() ? run / "paths" / ppo::numbered("update_", update) : fs::path(a.out);
  fs::create_directories(dir);
  int images = 0;
  for (const auto& [id, path] : selected) {
    const auto rec = env::read_recording(path.string());
    for (const auto& [floor, img] : eval::render_recording_paths(rec, cfg.env)) {
      char name[48];
      std::snprintf(name, sizeof name, "episode_%06d_floor_%02d.ppm", id, floor);
      eval::write_ppm((dir / name).string(), img);
      ++images;
    }
  }
  out << images << " images from " << selected.size() << " episodes written to " << dir.string() << '\n';
  return kExitOk;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config, a.overrides);
  if (a.episodes < 1) throw ConfigError("--episodes must be >= 1");
  const auto r = env::throughput_bench(cfg.env, a.episodes, a.seed);
  char b[200];
  std::snprintf(b, sizeof b, "episodes %zu  steps %ld  steps/s %.1f  mean return %.4f  mean floor %.4f\n",
                r.episodes.size(), r.total_steps, r.mean_steps_per_second, r.mean_return, r.mean_floor);
  out << b;
  if (!a.out.empty()) {
    std::ofstream os(a.out, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + a.out + "' for writing");
    env::write_bench_csv(os, r);
    if (!os) throw IoError("write to '" + a.out + "' failed");
  }
  return kExitOk;
}

// Parses argv and dispatches. Never throws; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"towerlab: PPO agents on a procedural tower environment"};
  app.require_subcommand(1);
  TrainArgs ta;
  EvalArgs ea;
  RenderArgs ra;
  BenchArgs ba;

  auto* train = app.add_subcommand("train", "train an agent into a run directory");
  train->add_option("--config", ta.config, "configuration file")->required();
  train->add_option("--override", ta.overrides, "key=value applied after the file (repeatable)");
  train->add_option("--run-dir", ta.run_dir, "output run directory")->required();
  train->add_flag("--resume", ta.resume, "continue an interrupted run");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out seeds");
  ev->add_option("--checkpoint", ea.checkpoint, "checkpoint file (.tlck)")->required();
  ev->add_option("--config", ea.config, "configuration file (default: the run's config.ini)");
  ev->add_option("--override", ea.overrides, "key=value applied after the file (repeatable)");
  ev->add_option("--out", ea.out, "output directory")->required();
  ev->add_option("--themes", ea.themes, "comma separated themes to evaluate");
  ev->add_option("--seeds", ea.seeds, "evaluation seeds (list or A-B ranges)");
  ev->add_option("--repetitions", ea.repetitions, "episodes per (theme, seed)");
  ev->add_flag("--greedy", ea.greedy, "argmax actions instead of sampling");

  auto* rp = app.add_subcommand("render-paths", "draw recorded evaluation paths per floor");
  rp->add_option("--run-dir", ra.run_dir, "run directory")->required();
  rp->add_option("--update", ra.update, "evaluation update (default: latest)");
  rp->add_option("--episode", ra.episodes, "episode id (repeatable, default: all)");
  rp->add_option("--out", ra.out, "output directory (default: RUN/paths/update_N)");

  auto* bench = app.add_subcommand("bench", "random-policy throughput and outcome baseline");
  bench->add_option("--config", ba.config, "configuration file (default: desk preset)");
  bench->add_option("--override", ba.overrides, "key=value applied after the file (repeatable)");
  bench->add_option("--episodes", ba.episodes, "episode count")->capture_default_str();
  bench->add_option("--seed", ba.seed, "rng seed")->capture_default_str();
  bench->add_option("--out", ba.out, "per-episode CSV (empty to skip)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (*train) return cmd_train(ta, out);
    if (*ev) return cmd_eval(ea, out);
    if (*rp) return cmd_render_paths(ra, out);
    return cmd_bench(ba, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParseError& e) {
    err << "malformed input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace towerlab::cli
