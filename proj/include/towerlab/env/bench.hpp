#pragma once

#include <chrono>
#include <ostream>
#include <vector>

#include "towerlab/core/rng.hpp"
#include "towerlab/env/minitower.hpp"

namespace towerlab::env {

struct BenchEpisode {
  std::uint64_t seed = 0;
  Theme theme = Theme::ancient;
  int steps = 0;
  double seconds = 0;
  double steps_per_second = 0;
  double episode_return = 0;
  int floor = 0;
};

struct BenchReport {
  std::vector<BenchEpisode> episodes;
  double mean_steps_per_second = 0;  // mean of per-episode rates; 0 when empty
  long total_steps = 0;
  double mean_return = 0;  // random-policy baseline for learning comparisons
  double mean_floor = 0;
};

// Uniform-random policy over the branch triple. Each episode draws its seed
// and theme from rng. Observation stacking is included in the timing.
inline BenchReport throughput_bench(const EnvConfig& cfg, int episodes, std::uint64_t seed) {
  BenchReport report;
  if (episodes <= 0) return report;
  Rng rng(seed);
  MiniTowerEnv env(cfg);
  std::vector<float> frames(static_cast<std::size_t>(cfg.stacked_frames * 3 * cfg.frame_height * cfg.frame_width));
  double sum_rate = 0;
  for (int e = 0; e < episodes; ++e) {
    BenchEpisode ep;
    ep.seed = rng();
    ep.theme = kAllThemes[uniform_index(rng, kAllThemes.size())];
    const auto t0 = std::chrono::steady_clock::now();
    env.reset(ep.seed, ep.theme);
    env.write_model_frames(frames.data());
    bool done = false;
    StepInfo info;
    while (!done) {
      const auto a = MultiDiscreteAction::from_indices(uniform_index(rng, 2), uniform_index(rng, 2), uniform_index(rng, 3));
      env.step_fast(a, done, info);
      env.write_model_frames(frames.data());
      ++ep.steps;
    }
    ep.episode_return = info.episode_return;
    ep.floor = info.floor;
    ep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ep.steps_per_second = ep.seconds > 0 ? ep.steps / ep.seconds : 0;
    sum_rate += ep.steps_per_second;
    report.mean_return += ep.episode_return;
    report.mean_floor += ep.floor;
    report.total_steps += ep.steps;
    report.episodes.push_back(ep);
  }
  const auto n = static_cast<double>(report.episodes.size());
  report.mean_steps_per_second = sum_rate / n;
  report.mean_return /= n;
  report.mean_floor /= n;
  return report;
}

inline void write_bench_csv(std::ostream& os, const BenchReport& r) {
  os << "episode,seed,theme,steps,seconds,steps_per_second,return,floor\n";
  char buf[64];
  for (std::size_t i = 0; i < r.episodes.size(); ++i) {
    const auto& e = r.episodes[i];
    os << i << ',' << e.seed << ',' << theme_name(e.theme) << ',' << e.steps << ',';
    std::snprintf(buf, sizeof buf, "%.9g", e.seconds);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.9g", e.steps_per_second);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.episode_return);
    os << buf << ',' << e.floor << '\n';
  }
}

}  // namespace towerlab::env
