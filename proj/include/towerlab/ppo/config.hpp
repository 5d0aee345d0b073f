#pragma once

#include <algorithm>
#include <string>

#include "towerlab/core/errors.hpp"

namespace towerlab::ppo {

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int total_updates = 50000;
  int epochs = 4;
  int num_envs = 16;
  // Transitions per update. With trajectory_per_env the value is the horizon
  // of each env instead of the total.
  int trajectory_length = 8192;
  bool trajectory_per_env = false;
  int minibatches = 4;
  double learning_rate = 3.25e-4;
  double clip_range = 0.2;
  double anneal_floor = 0.0;
  bool normalize_advantages = true;
  double max_grad_norm = 0.0;  // 0 disables gradient-norm clipping

  int horizon() const { return trajectory_per_env ? trajectory_length : trajectory_length / num_envs; }
  int batch_size() const { return horizon() * num_envs; }
  int minibatch_size() const { return batch_size() / minibatches; }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError(msg);
    };
    need(gamma >= 0 && gamma <= 1, "ppo.gamma must be in [0, 1]");
    need(gae_lambda >= 0 && gae_lambda <= 1, "ppo.gae_lambda must be in [0, 1]");
    need(value_coef >= 0, "ppo.value_coef must be >= 0");
    need(entropy_coef >= 0, "ppo.entropy_coef must be >= 0");
    need(total_updates >= 1, "ppo.total_updates must be >= 1");
    need(epochs >= 1, "ppo.epochs must be >= 1");
    need(num_envs >= 1, "ppo.num_envs must be >= 1");
    need(trajectory_length >= 1, "ppo.trajectory_length must be >= 1");
    need(trajectory_per_env || trajectory_length % num_envs == 0,
         "ppo.trajectory_length (" + std::to_string(trajectory_length) + ") must be divisible by ppo.num_envs (" +
             std::to_string(num_envs) + ")");
    need(minibatches >= 1, "ppo.minibatches must be >= 1");
    need(batch_size() % minibatches == 0, "ppo.minibatches (" + std::to_string(minibatches) +
                                              ") must divide num_envs * horizon (" + std::to_string(batch_size()) + ")");
    need(learning_rate >= 0, "ppo.learning_rate must be >= 0");
    need(clip_range > 0, "ppo.clip_range must be > 0");
    need(anneal_floor >= 0, "ppo.anneal_floor must be >= 0");
    need(max_grad_norm >= 0, "ppo.max_grad_norm must be >= 0");
  }
};

// max(floor, initial * (1 - progress)), progress clamped to [0, 1].
inline double linear_anneal(double initial, double progress, double floor = 0.0) {
  const double p = std::clamp(progress, 0.0, 1.0);
  return std::max(floor, initial * (1.0 - p));
}

}  // namespace towerlab::ppo
