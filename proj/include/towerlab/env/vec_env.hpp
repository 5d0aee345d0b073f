#pragma once

#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "towerlab/core/binio.hpp"
#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/env/minitower.hpp"
#include "towerlab/model/agent_model.hpp"

namespace towerlab::env {

struct VecEnvConfig {
  int num_envs = 16;
  std::vector<std::uint64_t> seed_pool;
  std::vector<Theme> theme_pool{Theme::ancient, Theme::industrial, Theme::modern};
  std::uint64_t base_rng_seed = 0;
  int num_threads = 1;  // results are identical for any value

  void validate() const {
    if (num_envs < 1) throw ConfigError("vec.num_envs must be >= 1");
    if (seed_pool.empty()) throw ConfigError("vec seed pool must not be empty");
    if (theme_pool.empty()) throw ConfigError("vec theme pool must not be empty");
    if (num_threads < 1) throw ConfigError("vec.num_threads must be >= 1");
  }
};

// Seeds [first, first + count).
inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::uint64_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

struct EpisodeEnd {
  StepInfo info;
  std::uint64_t seed = 0;
  Theme theme = Theme::ancient;
};

// Batched observations in model layout: frames [N, S*3, H, W] flattened,
// game_state [N, 2].
struct ObsBuffer {
  std::size_t num = 0;
  std::size_t frame_size = 0;  // S*3*H*W
  std::vector<float> frames;
  std::vector<float> game_state;

  template <class T>
  model::ObsBatch<T> to_batch(const EnvConfig& cfg) const {
    model::ObsBatch<T> b;
    b.frames = nn::Tensor<T>({num, static_cast<std::size_t>(cfg.stacked_frames * 3),
                              static_cast<std::size_t>(cfg.frame_height), static_cast<std::size_t>(cfg.frame_width)});
    b.game_state = nn::Tensor<T>({num, 2});
    for (std::size_t i = 0; i < frames.size(); ++i) b.frames[i] = static_cast<T>(frames[i]);
    for (std::size_t i = 0; i < game_state.size(); ++i) b.game_state[i] = static_cast<T>(game_state[i]);
    return b;
  }
};

struct StepBatch {
  ObsBuffer observations;
  std::vector<double> rewards;
  std::vector<bool> dones;
  std::vector<std::optional<EpisodeEnd>> infos;  // set only for slots that finished
};

// N MiniTower instances in lockstep with automatic reset. Each slot owns an
// RNG stream derived from base_rng_seed and its index; only that stream
// drives the slot's seed/theme draws, so slots never interact.
class VecEnv {
 public:
  VecEnv(VecEnvConfig vcfg, EnvConfig ecfg) : vcfg_(std::move(vcfg)), ecfg_(std::move(ecfg)) {
    vcfg_.validate();
    ecfg_.validate();
    const auto n = static_cast<std::size_t>(vcfg_.num_envs);
    envs_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      envs_.emplace_back(ecfg_);
      rngs_.emplace_back(derive_seed(vcfg_.base_rng_seed, i));
    }
    obs_.num = n;
    obs_.frame_size = static_cast<std::size_t>(ecfg_.stacked_frames * 3 * ecfg_.frame_height * ecfg_.frame_width);
    obs_.frames.assign(n * obs_.frame_size, 0.f);
    obs_.game_state.assign(n * 2, 0.f);
  }

  std::size_t size() const noexcept { return envs_.size(); }
  const EnvConfig& env_config() const noexcept { return ecfg_; }
  const VecEnvConfig& config() const noexcept { return vcfg_; }
  const MiniTowerEnv& env(std::size_t i) const { return envs_.at(i); }
  const ObsBuffer& observations() const noexcept { return obs_; }

  const ObsBuffer& reset() {
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      reset_slot(i);
      write_slot(i);
    }
    return obs_;
  }

  StepBatch step(const std::vector<MultiDiscreteAction>& actions) {
    if (actions.size() != envs_.size())
      throw UsageError("vec_step: got " + std::to_string(actions.size()) + " actions for " +
                       std::to_string(envs_.size()) + " environments");
    for (std::size_t i = 0; i < envs_.size(); ++i)
      if (!envs_[i].started()) throw UsageError("vec_step called before vec_reset");
    StepBatch out;
    const auto n = envs_.size();
    out.rewards.assign(n, 0.0);
    out.dones.assign(n, false);
    out.infos.assign(n, std::nullopt);
    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        bool done = false;
        StepInfo info;
        out.rewards[i] = envs_[i].step_fast(actions[i], done, info);
        // std::vector<bool> is not safe for concurrent writes; use a side array.
        done_flags_[i] = done ? 1 : 0;
        if (done) {
          out.infos[i] = EpisodeEnd{info, envs_[i].seed(), envs_[i].theme()};
          reset_slot(i);
        }
        write_slot(i);
      }
    };
    done_flags_.assign(n, 0);
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(vcfg_.num_threads), n);
    if (threads <= 1) {
      work(0, n);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (n + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo < hi) pool.emplace_back([&work, lo, hi] { work(lo, hi); });
      }
      for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i) out.dones[i] = done_flags_[i] != 0;
    out.observations = obs_;
    return out;
  }

  void save(ByteWriter& w) const {
    w.u32(static_cast<std::uint32_t>(envs_.size()));
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      w.str(save_rng(rngs_[i]));
      envs_[i].save(w);
    }
  }

  void load(ByteReader& r) {
    const auto n = r.u32();
    if (n != envs_.size()) r.fail("vec env snapshot has " + std::to_string(n) + " slots, config has " +
                                  std::to_string(envs_.size()));
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      load_rng(rngs_[i], r.str());
      envs_[i].load(r);
      if (envs_[i].started()) write_slot(i);
    }
  }

 private:
  void reset_slot(std::size_t i) {
    auto& rng = rngs_[i];
    const auto seed = vcfg_.seed_pool[uniform_index(rng, vcfg_.seed_pool.size())];
    const auto theme = vcfg_.theme_pool[uniform_index(rng, vcfg_.theme_pool.size())];
    envs_[i].reset(seed, theme);
  }

  void write_slot(std::size_t i) {
    envs_[i].write_model_frames(obs_.frames.data() + i * obs_.frame_size);
    const auto gs = envs_[i].game_state();
    obs_.game_state[2 * i] = gs[0];
    obs_.game_state[2 * i + 1] = gs[1];
  }

  VecEnvConfig vcfg_;
  EnvConfig ecfg_;
  std::vector<MiniTowerEnv> envs_;
  std::vector<Rng> rngs_;
  ObsBuffer obs_;
  std::vector<unsigned char> done_flags_;
};

}  // namespace towerlab::env
