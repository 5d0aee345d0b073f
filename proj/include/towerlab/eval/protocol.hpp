#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/env/minitower.hpp"
#include "towerlab/eval/stats.hpp"
#include "towerlab/model/agent_model.hpp"
#include "towerlab/nn/distributions.hpp"

namespace towerlab::eval {

using env::Theme;

struct EvalProtocol {
  std::vector<std::uint64_t> seeds{1000, 1001, 1002, 1003, 1004};
  int repetitions = 3;
  std::vector<Theme> themes{env::kAllThemes.begin(), env::kAllThemes.end()};
  bool greedy = false;  // argmax actions; default samples like training
  std::uint64_t rng_seed = 0;
  bool record_paths = true;

  std::size_t episode_count() const { return seeds.size() * themes.size() * static_cast<std::size_t>(repetitions); }

  void validate(const std::vector<std::uint64_t>& training_seeds) const {
    if (seeds.empty()) throw ConfigError("eval.seeds must not be empty");
    if (themes.empty()) throw ConfigError("eval.themes must not be empty");
    if (repetitions < 1) throw ConfigError("eval.repetitions must be >= 1");
    const std::set<std::uint64_t> pool(training_seeds.begin(), training_seeds.end());
    for (auto s : seeds)
      if (pool.count(s))
        throw ConfigError("eval seed " + std::to_string(s) + " is in the training seed pool; evaluation seeds must be held out");
  }
};

struct EpisodeSpec {
  Theme theme = Theme::ancient;
  std::uint64_t seed = 0;
  int repetition = 0;
};

struct EpisodeRow {
  std::size_t index = 0;
  Theme theme = Theme::ancient;
  std::uint64_t seed = 0;
  int repetition = 0;
  int floor = 0;
  int length = 0;
  double ret = 0;
  env::Termination termination = env::Termination::none;
  int keys = 0;
  int doors = 0;
};

// Theme-major, then seed, then repetition.
inline std::vector<EpisodeSpec> protocol_episodes(const EvalProtocol& p) {
  std::vector<EpisodeSpec> out;
  for (auto t : p.themes)
    for (auto s : p.seeds)
      for (int r = 0; r < p.repetitions; ++r) out.push_back({t, s, r});
  return out;
}

struct EpisodeRun {
  std::vector<EpisodeRow> rows;
  std::vector<env::EpisodeRecording> recordings;  // empty unless requested
};

// Runs every spec to termination with the frozen policy. Live episodes are
// stepped together as one batch; each episode samples from its own RNG
// stream (derived from rng_seed and its index), so outcomes do not depend
// on which other episodes are still running.
template <class T>
EpisodeRun run_episodes(model::AgentModel<T>& model, const env::EnvConfig& cfg, const std::vector<EpisodeSpec>& specs,
                        std::uint64_t rng_seed, bool greedy, bool record) {
  const std::size_t n = specs.size();
  std::vector<env::MiniTowerEnv> envs;
  envs.reserve(n);
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < n; ++i) {
    envs.emplace_back(cfg);
    envs[i].set_recording(record);
    envs[i].reset(specs[i].seed, specs[i].theme);
    rngs.emplace_back(derive_seed(rng_seed, i));
  }
  EpisodeRun run;
  run.rows.resize(n);
  if (record) run.recordings.resize(n);
  std::vector<std::size_t> live(n);
  for (std::size_t i = 0; i < n; ++i) live[i] = i;
  const std::size_t frame =
      static_cast<std::size_t>(cfg.stacked_frames * 3 * cfg.frame_height * cfg.frame_width);
  const auto& branches = model.config().branch_sizes;
  while (!live.empty()) {
    model::ObsBatch<T> obs;
    obs.frames = nn::Tensor<T>({live.size(), static_cast<std::size_t>(cfg.stacked_frames * 3),
                                static_cast<std::size_t>(cfg.frame_height), static_cast<std::size_t>(cfg.frame_width)});
    obs.game_state = nn::Tensor<T>({live.size(), 2});
    std::vector<float> buf(frame);
    for (std::size_t k = 0; k < live.size(); ++k) {
      auto& e = envs[live[k]];
      e.write_model_frames(buf.data());
      std::copy(buf.begin(), buf.end(), obs.frames.data().begin() + static_cast<std::ptrdiff_t>(k * frame));
      const auto gs = e.game_state();
      obs.game_state[2 * k] = static_cast<T>(gs[0]);
      obs.game_state[2 * k + 1] = static_cast<T>(gs[1]);
    }
    const auto out = model.forward(obs);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < live.size(); ++k) {
      const auto i = live[k];
      std::vector<std::size_t> a;
      for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto kb = branches[b];
        std::vector<T> row(out.logits[b].data().begin() + static_cast<std::ptrdiff_t>(k * kb),
                           out.logits[b].data().begin() + static_cast<std::ptrdiff_t>((k + 1) * kb));
        const auto probs = nn::softmax(row);
        a.push_back(greedy ? static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin())
                           : nn::categorical_sample(probs, rngs[i]));
      }
      bool done = false;
      env::StepInfo info;
      envs[i].step_fast(env::MultiDiscreteAction::from_indices(a), done, info);
      if (done) {
        auto& r = run.rows[i];
        r = {i, specs[i].theme, specs[i].seed, specs[i].repetition, info.floor, info.episode_length,
             info.episode_return, info.termination, info.keys_collected, info.doors_opened};
        if (record) run.recordings[i] = envs[i].recording();
      } else {
        still.push_back(i);
      }
    }
    live = std::move(still);
  }
  return run;
}

struct ThemeAggregate {
  Theme theme = Theme::ancient;
  std::size_t episodes = 0;
  double mean_floor = 0;
  double mean_length = 0;
  double mean_return = 0;
  double var_floor = 0;
  double var_length = 0;
  double floor_dev_up = 0;
  double floor_dev_down = 0;
  double length_std = 0;
};

inline ThemeAggregate aggregate_rows(Theme theme, const std::vector<const EpisodeRow*>& rows) {
  ThemeAggregate a;
  a.theme = theme;
  a.episodes = rows.size();
  std::vector<double> f, l, r;
  for (const auto* row : rows) {
    f.push_back(row->floor);
    l.push_back(row->length);
    r.push_back(row->ret);
  }
  a.mean_floor = mean_of(f);
  a.mean_length = mean_of(l);
  a.mean_return = mean_of(r);
  a.var_floor = variance_of(f);
  a.var_length = variance_of(l);
  const auto d = asymmetric_deviation(f);
  a.floor_dev_up = d.up;
  a.floor_dev_down = d.down;
  a.length_std = std::sqrt(a.var_length);
  return a;
}

struct EvalReport {
  int update = 0;  // training update the policy came from; 0 when unknown
  std::vector<EpisodeRow> rows;

  // One entry per theme present, in theme id order.
  std::vector<ThemeAggregate> aggregates() const {
    std::map<Theme, std::vector<const EpisodeRow*>> by;
    for (const auto& r : rows) by[r.theme].push_back(&r);
    std::vector<ThemeAggregate> out;
    for (const auto& [t, rs] : by) out.push_back(aggregate_rows(t, rs));
    return out;
  }

  // Mean terminal floor over rows whose theme is in `themes`.
  double mean_floor(const std::vector<Theme>& themes) const {
    std::vector<double> f;
    for (const auto& r : rows)
      if (std::find(themes.begin(), themes.end(), r.theme) != themes.end()) f.push_back(r.floor);
    return mean_of(f);
  }
};

template <class T>
EvalReport evaluate(model::AgentModel<T>& model, const env::EnvConfig& cfg, const EvalProtocol& protocol,
                    const std::vector<std::uint64_t>& training_seeds,
                    std::vector<env::EpisodeRecording>* recordings = nullptr) {
  protocol.validate(training_seeds);
  auto run = run_episodes(model, cfg, protocol_episodes(protocol), protocol.rng_seed, protocol.greedy,
                          recordings != nullptr);
  if (recordings) *recordings = std::move(run.recordings);
  EvalReport rep;
  rep.rows = std::move(run.rows);
  return rep;
}

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

inline const char* kEpisodeCsvHeader = "episode,theme,seed,repetition,floor,length,return,termination,keys,doors";

inline void write_episode_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << kEpisodeCsvHeader << '\n';
  for (const auto& r : rep.rows)
    os << r.index << ',' << env::theme_name(r.theme) << ',' << r.seed << ',' << r.repetition << ',' << r.floor << ','
       << r.length << ',' << fmt_num(r.ret) << ',' << env::termination_name(r.termination) << ',' << r.keys << ','
       << r.doors << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline env::Termination parse_termination(const std::string& s) {
  for (auto t : {env::Termination::none, env::Termination::timeout, env::Termination::fell, env::Termination::floor_cap})
    if (s == env::termination_name(t)) return t;
  throw ConfigError("unknown termination '" + s + "'");
}

inline EvalReport read_episode_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(is, line);
  if (line != kEpisodeCsvHeader) throw ParseError(path + ": unexpected episode CSV header", 0);
  EvalReport rep;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw ParseError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      EpisodeRow r;
      r.index = std::stoull(f[0]);
      r.theme = env::parse_theme(f[1]);
      r.seed = std::stoull(f[2]);
      r.repetition = std::stoi(f[3]);
      r.floor = std::stoi(f[4]);
      r.length = std::stoi(f[5]);
      r.ret = std::stod(f[6]);
      r.termination = parse_termination(f[7]);
      r.keys = std::stoi(f[8]);
      r.doors = std::stoi(f[9]);
      rep.rows.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rep;
}

inline const char* kAggregateCsvHeader =
    "theme,episodes,mean_floor,mean_length,mean_return,var_floor,var_length,floor_dev_up,floor_dev_down,length_std";

inline void write_aggregate_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << kAggregateCsvHeader << '\n';
  for (const auto& a : rep.aggregates())
    os << env::theme_name(a.theme) << ',' << a.episodes << ',' << fmt_num(a.mean_floor) << ',' << fmt_num(a.mean_length)
       << ',' << fmt_num(a.mean_return) << ',' << fmt_num(a.var_floor) << ',' << fmt_num(a.var_length) << ','
       << fmt_num(a.floor_dev_up) << ',' << fmt_num(a.floor_dev_down) << ',' << fmt_num(a.length_std) << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace towerlab::eval
