#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "towerlab/core/rng.hpp"
#include "towerlab/nn/adam.hpp"
#include "towerlab/ppo/config.hpp"
#include "towerlab/ppo/loss.hpp"
#include "towerlab/ppo/rollout.hpp"

namespace towerlab::ppo {

struct TrainStats {
  int update = 0;  // 1-based
  double lr = 0;
  double clip_range = 0;
  double entropy_coef = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  // Over episodes finished during this update's rollout; NaN when none did.
  double mean_return = std::numeric_limits<double>::quiet_NaN();
  double mean_length = std::numeric_limits<double>::quiet_NaN();
  double mean_floor = std::numeric_limits<double>::quiet_NaN();
  int episodes = 0;
};

struct Schedule {
  double lr;
  double clip_range;
  double entropy_coef;
};

inline Schedule annealed(const PPOConfig& c, double progress) {
  return {linear_anneal(c.learning_rate, progress, c.anneal_floor), linear_anneal(c.clip_range, progress, c.anneal_floor),
          linear_anneal(c.entropy_coef, progress, c.anneal_floor)};
}

template <class T>
Minibatch<T> make_minibatch(const RolloutBuffer<T>& buf, const std::vector<std::size_t>& idx,
                            const env::EnvConfig& env_cfg) {
  if (buf.advantages.size() != buf.size()) throw UsageError("make_minibatch: compute_gae has not been run on the buffer");
  Minibatch<T> mb;
  mb.obs = gather_batch(buf, idx, env_cfg);
  for (auto k : idx) {
    const auto& a = buf.actions[k];
    mb.actions.push_back({a[0], a[1], a[2]});
    mb.old_log_probs.push_back(static_cast<double>(buf.log_probs[k]));
    mb.old_values.push_back(static_cast<double>(buf.values[k]));
    mb.advantages.push_back(buf.advantages[k]);
    mb.returns.push_back(buf.returns[k]);
  }
  return mb;
}

template <class T>
void clip_grad_norm(const std::vector<nn::Parameter<T>*>& params, double max_norm) {
  double sq = 0;
  for (auto* p : params)
    for (auto g : p->value.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0) return;
  const T scale = static_cast<T>(max_norm / norm);
  for (auto* p : params)
    for (auto& g : p->value.grad()) g *= scale;
}

// PPO optimization on a collected, GAE-processed buffer: `epochs` passes,
// each over a fresh shuffle of the transitions split into `minibatches`.
// lr, clip range and entropy coefficient come from the schedule at
// `progress` and stay fixed for the whole update.
template <class T>
TrainStats update(model::AgentModel<T>& model, nn::AdamState<T>& adam, const RolloutBuffer<T>& buf,
                  const PPOConfig& cfg, const env::EnvConfig& env_cfg, double progress, Rng& rng) {
  if (buf.advantages.size() != buf.size()) throw UsageError("update: compute_gae has not been run on the buffer");
  const auto s = annealed(cfg, progress);
  TrainStats st;
  st.lr = s.lr;
  st.clip_range = s.clip_range;
  st.entropy_coef = s.entropy_coef;
  const LossCoefficients k{s.clip_range, cfg.value_coef, s.entropy_coef, cfg.normalize_advantages};

  const std::size_t n = buf.size();
  const std::size_t mbs = static_cast<std::size_t>(cfg.minibatches);
  if (n % mbs != 0) throw ConfigError("minibatch count does not divide the rollout size");
  const std::size_t size = n / mbs;
  std::vector<std::size_t> order(n);
  auto params = model.parameters();
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    towerlab::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < mbs; ++b) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * size),
                                   order.begin() + static_cast<std::ptrdiff_t>((b + 1) * size));
      const auto mb = make_minibatch(buf, idx, env_cfg);
      model.zero_grad();
      const auto terms = ppo_loss(model, mb, k);
      if (cfg.max_grad_norm > 0) clip_grad_norm(params, cfg.max_grad_norm);
      nn::adam_step(params, adam, s.lr);
      st.policy_loss += terms.policy;
      st.value_loss += terms.value;
      st.entropy += terms.entropy;
      st.clip_fraction += terms.clip_fraction;
      ++count;
    }
  }
  st.policy_loss /= count;
  st.value_loss /= count;
  st.entropy /= count;
  st.clip_fraction /= count;

  if (!buf.finished.empty()) {
    double r = 0, l = 0, f = 0;
    for (const auto& e : buf.finished) {
      r += e.info.episode_return;
      l += e.info.episode_length;
      f += e.info.floor;
    }
    const double m = static_cast<double>(buf.finished.size());
    st.mean_return = r / m;
    st.mean_length = l / m;
    st.mean_floor = f / m;
    st.episodes = static_cast<int>(buf.finished.size());
  }
  return st;
}

}  // namespace towerlab::ppo
