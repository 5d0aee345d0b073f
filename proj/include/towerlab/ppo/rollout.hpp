#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/env/vec_env.hpp"
#include "towerlab/model/agent_model.hpp"

namespace towerlab::ppo {

// Transitions are indexed t * num_envs + env. Frames are kept as raw bytes
// in model layout and normalized when a minibatch is assembled.
template <class T>
struct RolloutBuffer {
  std::size_t num_envs = 0;
  std::size_t horizon = 0;
  std::size_t frame_size = 0;
  std::vector<std::uint8_t> frames;
  std::vector<float> game_state;  // 2 per transition
  std::vector<std::array<std::uint8_t, 3>> actions;
  std::vector<T> log_probs;
  std::vector<T> values;
  std::vector<double> rewards;
  std::vector<unsigned char> dones;
  std::vector<T> bootstrap;  // per env, value of the state after the last step
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<env::EpisodeEnd> finished;  // episodes completed during collection

  RolloutBuffer() = default;
  RolloutBuffer(std::size_t envs, std::size_t t, std::size_t frame) : num_envs(envs), horizon(t), frame_size(frame) {
    const std::size_t n = envs * t;
    frames.assign(n * frame, 0);
    game_state.assign(2 * n, 0.f);
    actions.assign(n, {0, 0, 0});
    log_probs.assign(n, T{});
    values.assign(n, T{});
    rewards.assign(n, 0.0);
    dones.assign(n, 0);
    bootstrap.assign(envs, T{});
  }

  std::size_t size() const noexcept { return num_envs * horizon; }
  std::size_t index(std::size_t t, std::size_t e) const noexcept { return t * num_envs + e; }
};

// Normalized model input for the given transitions.
template <class T>
model::ObsBatch<T> gather_batch(const RolloutBuffer<T>& buf, const std::vector<std::size_t>& idx,
                                const env::EnvConfig& cfg) {
  std::array<T, 256> lut;
  for (int b = 0; b < 256; ++b)
    lut[static_cast<std::size_t>(b)] = static_cast<T>(env::normalize_byte(static_cast<std::uint8_t>(b), cfg.double_normalization));
  model::ObsBatch<T> out;
  out.frames = nn::Tensor<T>({idx.size(), static_cast<std::size_t>(cfg.stacked_frames * 3),
                              static_cast<std::size_t>(cfg.frame_height), static_cast<std::size_t>(cfg.frame_width)});
  out.game_state = nn::Tensor<T>({idx.size(), 2});
  auto dst = out.frames.data();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::uint8_t* src = buf.frames.data() + idx[k] * buf.frame_size;
    T* d = dst.data() + k * buf.frame_size;
    for (std::size_t j = 0; j < buf.frame_size; ++j) d[j] = lut[src[j]];
    out.game_state[2 * k] = static_cast<T>(buf.game_state[2 * idx[k]]);
    out.game_state[2 * k + 1] = static_cast<T>(buf.game_state[2 * idx[k] + 1]);
  }
  return out;
}

// Current vec-env observations as a model batch.
template <class T>
model::ObsBatch<T> current_batch(const env::VecEnv& vec) {
  return vec.observations().template to_batch<T>(vec.env_config());
}

// Steps every env `horizon` times with actions sampled from the model.
// Values and log-probs are those seen at sampling time; the bootstrap value
// is evaluated on the observation following the final step.
template <class T>
RolloutBuffer<T> collect_rollout(model::AgentModel<T>& model, env::VecEnv& vec, std::size_t horizon, Rng& rng) {
  const auto& cfg = vec.env_config();
  const std::size_t n = vec.size();
  const std::size_t frame = static_cast<std::size_t>(cfg.stacked_frames * 3 * cfg.frame_height * cfg.frame_width);
  RolloutBuffer<T> buf(n, horizon, frame);
  std::vector<env::MultiDiscreteAction> actions(n);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto& obs = vec.observations();
    for (std::size_t e = 0; e < n; ++e) {
      const auto k = buf.index(t, e);
      vec.env(e).write_model_bytes(buf.frames.data() + k * frame);
      buf.game_state[2 * k] = obs.game_state[2 * e];
      buf.game_state[2 * k + 1] = obs.game_state[2 * e + 1];
    }
    const auto acted = model.act(current_batch<T>(vec), rng);
    for (std::size_t e = 0; e < n; ++e) {
      const auto k = buf.index(t, e);
      const auto& a = acted[e].action;
      buf.actions[k] = {static_cast<std::uint8_t>(a[0]), static_cast<std::uint8_t>(a[1]), static_cast<std::uint8_t>(a[2])};
      buf.log_probs[k] = acted[e].log_prob;
      buf.values[k] = acted[e].value;
      actions[e] = env::MultiDiscreteAction::from_indices(a);
    }
    const auto step = vec.step(actions);
    for (std::size_t e = 0; e < n; ++e) {
      const auto k = buf.index(t, e);
      buf.rewards[k] = step.rewards[e];
      buf.dones[k] = step.dones[e] ? 1 : 0;
      if (step.infos[e]) buf.finished.push_back(*step.infos[e]);
    }
  }
  const auto out = model.forward(current_batch<T>(vec));
  for (std::size_t e = 0; e < n; ++e) buf.bootstrap[e] = out.values[e];
  return buf;
}

// Backward recursion per env:
//   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// with V_T the bootstrap value; returns = A + V.
template <class T>
void compute_gae(RolloutBuffer<T>& buf, double gamma, double lambda) {
  const std::size_t n = buf.num_envs, horizon = buf.horizon;
  if (buf.rewards.size() != n * horizon || buf.bootstrap.size() != n)
    throw UsageError("compute_gae: rollout buffer is not fully populated");
  buf.advantages.assign(n * horizon, 0.0);
  buf.returns.assign(n * horizon, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    double next_value = static_cast<double>(buf.bootstrap[e]);
    double next_adv = 0.0;
    for (std::size_t t = horizon; t-- > 0;) {
      const auto k = buf.index(t, e);
      const double live = buf.dones[k] ? 0.0 : 1.0;
      const double v = static_cast<double>(buf.values[k]);
      const double delta = buf.rewards[k] + gamma * next_value * live - v;
      next_adv = delta + gamma * lambda * live * next_adv;
      buf.advantages[k] = next_adv;
      buf.returns[k] = next_adv + v;
      next_value = v;
    }
  }
}

}  // namespace towerlab::ppo
