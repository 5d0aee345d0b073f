#pragma once

// Training run driver. Run directory layout:
//
//   config.ini                        resolved configuration
//   stats.csv                         one row per update
//   train.state                       exact resume state (latest checkpoint)
//   checkpoints/checkpoint_NNNNNN.tlck  parameters after update N
//   eval/update_NNNNNN/episodes.csv   one row per evaluation episode
//   eval/update_NNNNNN/aggregate.csv  per-theme aggregates
//   eval/update_NNNNNN/recordings/episode_NNN.tlep
//   eval/curves.csv, eval/curves.ppm, eval/histogram.csv, eval/histogram.ppm
//
// train.state (little-endian): magic "TLST", u32 version, u32 completed
// updates, string resolved config, u32 parameter count, then per parameter
// (name, u64 length, f64 values), u64 Adam step, Adam m and v as f64 in the
// same layout, string RNG state, and the vec-env snapshot.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "towerlab/config/run_config.hpp"
#include "towerlab/core/binio.hpp"
#include "towerlab/core/fp_env.hpp"
#include "towerlab/env/vec_env.hpp"
#include "towerlab/eval/curves.hpp"
#include "towerlab/eval/histogram.hpp"
#include "towerlab/nn/checkpoint.hpp"
#include "towerlab/ppo/update.hpp"

namespace towerlab::ppo {

namespace fs = std::filesystem;

inline constexpr char kStateMagic[4] = {'T', 'L', 'S', 'T'};
inline constexpr std::uint32_t kStateVersion = 1;

inline const char* kStatsHeader =
    "update,lr,clip_range,entropy_coef,policy_loss,value_loss,entropy,clip_fraction,mean_return,mean_length,mean_floor,"
    "episodes";

inline std::string stats_row(const TrainStats& s) {
  using eval::fmt_num;
  return std::to_string(s.update) + ',' + fmt_num(s.lr) + ',' + fmt_num(s.clip_range) + ',' + fmt_num(s.entropy_coef) +
         ',' + fmt_num(s.policy_loss) + ',' + fmt_num(s.value_loss) + ',' + fmt_num(s.entropy) + ',' +
         fmt_num(s.clip_fraction) + ',' + fmt_num(s.mean_return) + ',' + fmt_num(s.mean_length) + ',' +
         fmt_num(s.mean_floor) + ',' + std::to_string(s.episodes);
}

inline std::string numbered(const std::string& prefix, int n, const std::string& suffix = "") {
  char b[16];
  std::snprintf(b, sizeof b, "%06d", n);
  return prefix + b + suffix;
}

inline fs::path checkpoint_path(const fs::path& run_dir, int update) {
  return run_dir / "checkpoints" / numbered("checkpoint_", update, ".tlck");
}

inline fs::path eval_dir(const fs::path& run_dir, int update) { return run_dir / "eval" / numbered("update_", update); }

// Subsidiary RNG streams, all derived from the master seed.
struct Streams {
  std::uint64_t init, vec, train;
  explicit Streams(std::uint64_t master)
      : init(derive_seed(master, 1)), vec(derive_seed(master, 2)), train(derive_seed(master, 3)) {}
};

inline env::VecEnvConfig vec_config(const config::RunConfig& c) {
  env::VecEnvConfig v;
  v.num_envs = c.ppo.num_envs;
  v.seed_pool = c.train_seeds;
  v.theme_pool = c.train_themes;
  v.base_rng_seed = Streams(c.seed).vec;
  v.num_threads = c.threads;
  return v;
}

// Evaluation artifacts for one checkpoint: episode and aggregate CSVs plus
// optional recordings under eval/update_N.
template <class T>
eval::EvalReport run_eval(model::AgentModel<T>& model, const config::RunConfig& c, const fs::path& out_dir, int update) {
  fs::create_directories(out_dir);
  std::vector<env::EpisodeRecording> recs;
  auto rep = eval::evaluate(model, c.env, c.eval, c.train_seeds, c.eval.record_paths ? &recs : nullptr);
  rep.update = update;
  eval::write_episode_csv((out_dir / "episodes.csv").string(), rep);
  eval::write_aggregate_csv((out_dir / "aggregate.csv").string(), rep);
  if (c.eval.record_paths) {
    fs::create_directories(out_dir / "recordings");
    for (std::size_t i = 0; i < recs.size(); ++i)
      env::write_recording((out_dir / "recordings" / numbered("episode_", static_cast<int>(i), ".tlep")).string(), recs[i]);
  }
  return rep;
}

// Reports already written under run_dir/eval, in update order.
inline std::vector<eval::EvalReport> load_eval_reports(const fs::path& run_dir) {
  std::vector<eval::EvalReport> out;
  if (!fs::exists(run_dir / "eval")) return out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(run_dir / "eval"))
    if (e.is_directory() && e.path().filename().string().rfind("update_", 0) == 0 && fs::exists(e.path() / "episodes.csv"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto rep = eval::read_episode_csv((d / "episodes.csv").string());
    rep.update = std::stoi(d.filename().string().substr(7));
    out.push_back(std::move(rep));
  }
  return out;
}

// Curves and termination histogram over every report in the run.
inline void write_eval_summaries(const fs::path& run_dir, const config::RunConfig& c) {
  const auto reports = load_eval_reports(run_dir);
  if (reports.empty()) return;
  const auto pts = eval::curve_points(reports);
  eval::write_curves_csv((run_dir / "eval" / "curves.csv").string(), pts);
  eval::write_ppm((run_dir / "eval" / "curves.ppm").string(), eval::curves_image(pts));
  const auto h = eval::termination_histogram(reports, c.train_themes, c.env.floor_cap);
  eval::write_histogram_csv((run_dir / "eval" / "histogram.csv").string(), h);
  eval::write_ppm((run_dir / "eval" / "histogram.ppm").string(), eval::histogram_image(h));
}

// Evaluation always runs on the parameters as stored in the checkpoint
// (f32), so re-evaluating a checkpoint reproduces the training-time report.
inline eval::EvalReport evaluate_checkpoint(const fs::path& checkpoint, const config::RunConfig& c, const fs::path& out_dir,
                                            int update) {
  ScopedFlushDenormals ftz;
  model::AgentModel<float> m(c.model_config());
  nn::load_checkpoint(checkpoint.string(), m.parameters());
  return run_eval(m, c, out_dir, update);
}

template <class T>
struct Trainer {
  config::RunConfig cfg;
  fs::path run_dir;
  model::AgentModel<T> model;
  nn::AdamState<T> adam;
  env::VecEnv vec;
  Rng rng;
  int completed = 0;

  Trainer(config::RunConfig c, fs::path dir)
      : cfg(std::move(c)), run_dir(std::move(dir)), model(cfg.model_config()), vec(vec_config(cfg), cfg.env),
        rng(Streams(cfg.seed).train) {
    Rng init(Streams(cfg.seed).init);
    model.initialize(init);
    vec.reset();
  }

  void save_state(const fs::path& path) {
    ByteWriter w;
    w.bytes(kStateMagic, 4);
    w.u32(kStateVersion);
    w.u32(static_cast<std::uint32_t>(completed));
    w.str(config::to_ini(cfg));
    auto params = model.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
      w.str(p->name);
      w.u64(p->value.size());
      for (auto v : p->value.data()) w.f64(static_cast<double>(v));
    }
    w.u64(adam.step);
    w.u32(static_cast<std::uint32_t>(adam.m.size()));
    for (std::size_t i = 0; i < adam.m.size(); ++i) {
      w.u64(adam.m[i].size());
      for (auto v : adam.m[i]) w.f64(static_cast<double>(v));
      for (auto v : adam.v[i]) w.f64(static_cast<double>(v));
    }
    w.str(save_rng(rng));
    vec.save(w);
    const auto tmp = path.string() + ".tmp";
    w.write_file(tmp);
    fs::rename(tmp, path);
  }

  void load_state(const fs::path& path) {
    auto r = ByteReader::from_file(path.string());
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != std::string(kStateMagic, 4)) r.fail("bad train state magic", 0);
    if (r.u32() != kStateVersion) r.fail("unsupported train state version", 4);
    const auto done = static_cast<int>(r.u32());
    if (r.str() != config::to_ini(cfg))
      throw ConfigError("train.state in '" + run_dir.string() + "' was written with a different configuration");
    auto params = model.parameters();
    if (r.u32() != params.size()) r.fail("parameter count mismatch");
    for (auto* p : params) {
      if (r.str() != p->name) r.fail("parameter name mismatch for '" + p->name + "'");
      if (r.u64() != p->value.size()) r.fail("parameter size mismatch for '" + p->name + "'");
      for (auto& v : p->value.data()) v = static_cast<T>(r.f64());
    }
    adam.step = r.u64();
    const auto slots = r.u32();
    adam.m.assign(slots, {});
    adam.v.assign(slots, {});
    for (std::uint32_t i = 0; i < slots; ++i) {
      const auto n = r.u64();
      if (n * 16 > r.remaining()) r.fail("adam moments truncated");
      adam.m[i].resize(n);
      adam.v[i].resize(n);
      for (auto& v : adam.m[i]) v = static_cast<T>(r.f64());
      for (auto& v : adam.v[i]) v = static_cast<T>(r.f64());
    }
    load_rng(rng, r.str());
    vec.load(r);
    if (!r.at_end()) r.fail("trailing bytes in train state");
    completed = done;
  }

  TrainStats step() {
    const double progress = static_cast<double>(completed) / cfg.ppo.total_updates;
    auto buf = collect_rollout(model, vec, static_cast<std::size_t>(cfg.ppo.horizon()), rng);
    compute_gae(buf, cfg.ppo.gamma, cfg.ppo.gae_lambda);
    auto st = update(model, adam, buf, cfg.ppo, cfg.env, progress, rng);
    st.update = ++completed;
    return st;
  }
};

// Keeps the header and the first `rows` data rows.
inline void truncate_stats(const fs::path& path, int rows) {
  std::ifstream is(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line) && static_cast<int>(lines.size()) <= rows) lines.push_back(line);
  is.close();
  if (lines.empty() || lines[0] != kStatsHeader) throw ConfigError("'" + path.string() + "' is not a stats CSV");
  if (static_cast<int>(lines.size()) != rows + 1)
    throw ConfigError("'" + path.string() + "' has fewer rows than the resume state");
  std::ofstream os(path, std::ios::trunc);
  for (const auto& l : lines) os << l << '\n';
  if (!os) throw IoError("rewrite of '" + path.string() + "' failed");
}

struct TrainOptions {
  bool resume = false;  // continue from run_dir/train.state when present
  int stop_after = 0;   // stop once this many updates are complete (0 = run to the end)
  std::function<void(const TrainStats&)> on_update;
  std::function<void(const eval::EvalReport&)> on_eval;
};

template <class T>
int train_impl(const config::RunConfig& cfg, const fs::path& run_dir, const TrainOptions& opt) {
  fs::create_directories(run_dir / "checkpoints");
  Trainer<T> tr(cfg, run_dir);
  const auto state = run_dir / "train.state";
  const auto stats = run_dir / "stats.csv";
  if (opt.resume && fs::exists(state)) {
    tr.load_state(state);
    truncate_stats(stats, tr.completed);
  } else {
    config::save((run_dir / "config.ini").string(), cfg);
    std::ofstream os(stats, std::ios::trunc);
    os << kStatsHeader << '\n';
    if (!os) throw IoError("cannot write '" + stats.string() + "'");
  }
  std::ofstream log(stats, std::ios::app);
  const int total = cfg.ppo.total_updates;
  const int stop = opt.stop_after > 0 ? std::min(opt.stop_after, total) : total;
  while (tr.completed < stop) {
    const auto st = tr.step();
    const int u = st.update;
    bool logged = false;
    // A disk failure leaves a state matching the rows already in stats.csv.
    auto rescue = [&] {
      if (!logged) return;
      try {
        tr.save_state(state);
      } catch (const std::exception&) {
      }
    };
    try {
      log << stats_row(st) << '\n';
      log.flush();
      if (!log) throw IoError("write to '" + stats.string() + "' failed");
      logged = true;
      if (opt.on_update) opt.on_update(st);
      const bool do_eval = cfg.eval_interval > 0 && u % cfg.eval_interval == 0;
      const bool do_ckpt = do_eval || u == total || u == stop ||
                           (cfg.checkpoint_interval > 0 && u % cfg.checkpoint_interval == 0);
      if (do_ckpt) {
        nn::save_checkpoint(checkpoint_path(run_dir, u).string(), tr.model.parameters());
        tr.save_state(state);
      }
      if (do_eval) {
        const auto rep = evaluate_checkpoint(checkpoint_path(run_dir, u), cfg, eval_dir(run_dir, u), u);
        write_eval_summaries(run_dir, cfg);
        if (opt.on_eval) opt.on_eval(rep);
      }
    } catch (const IoError&) {
      rescue();
      throw;
    } catch (const fs::filesystem_error& e) {
      rescue();
      throw IoError(e.what());
    }
  }
  return tr.completed;
}

// Runs (or resumes) training into run_dir. Returns the number of completed
// updates.
inline int train(const config::RunConfig& cfg, const fs::path& run_dir, const TrainOptions& opt = {}) {
  cfg.validate();
  ScopedFlushDenormals ftz;
  return cfg.precision == config::Precision::f64 ? train_impl<double>(cfg, run_dir, opt)
                                                 : train_impl<float>(cfg, run_dir, opt);
}

}  // namespace towerlab::ppo
