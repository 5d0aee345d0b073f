#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/model/agent_model.hpp"

namespace towerlab::ppo {

// Per-sample clipped surrogate objective min(rho A, clip(rho, 1-eps, 1+eps) A).
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

// Per-sample clipped value loss max((V-R)^2, (V_old + clip(V-V_old, -eps, eps) - R)^2).
inline double clipped_value_loss(double value, double old_value, double ret, double eps) {
  const double clipped = old_value + std::clamp(value - old_value, -eps, eps);
  return std::max((value - ret) * (value - ret), (clipped - ret) * (clipped - ret));
}

// Advantages shifted to mean 0 and scaled by 1 / (std + 1e-8), population std.
inline std::vector<double> normalize_advantages(const std::vector<double>& a) {
  if (a.empty()) return {};
  double mean = 0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  double var = 0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mean) / (sd + 1e-8);
  return out;
}

template <class T>
struct Minibatch {
  model::ObsBatch<T> obs;
  std::vector<std::vector<std::size_t>> actions;
  std::vector<double> old_log_probs;
  std::vector<double> old_values;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct LossTerms {
  double loss = 0;
  double policy = 0;
  double value = 0;
  double entropy = 0;
  double clip_fraction = 0;
};

struct LossCoefficients {
  double clip_range = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool normalize_advantages = true;
};

// loss = policy + c_v * value - c_e * entropy, with
//   policy  = -mean(clipped_surrogate(rho, A))
//   value   = mean(clipped_value_loss(V, V_old, R))
//   entropy = mean(branch-mean entropy)
// Evaluates the model on the minibatch and accumulates gradients of the loss
// into its parameters. Any non-finite term raises TrainingError before
// gradients are touched.
template <class T>
LossTerms ppo_loss(model::AgentModel<T>& model, const Minibatch<T>& mb, const LossCoefficients& k) {
  const std::size_t m = mb.actions.size();
  if (m == 0) throw UsageError("ppo_loss: empty minibatch");
  const auto ev = model.evaluate(mb.obs, mb.actions);
  const auto adv = k.normalize_advantages ? normalize_advantages(mb.advantages) : mb.advantages;
  const double eps = k.clip_range;
  const double inv = 1.0 / static_cast<double>(m);

  LossTerms out;
  std::vector<T> dlogp(m), dent(m), dval(m);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double logp = static_cast<double>(ev.log_probs[i]);
    const double ratio = std::exp(logp - mb.old_log_probs[i]);
    const double a = adv[i];
    const double unclipped = ratio * a;
    const double surrogate = clipped_surrogate(ratio, a, eps);
    out.policy -= surrogate * inv;
    // The gradient flows through the unclipped branch only when it is the min.
    dlogp[i] = static_cast<T>(unclipped <= surrogate ? -unclipped * inv : 0.0);
    if (std::abs(ratio - 1.0) > eps) ++clipped;

    const double v = static_cast<double>(ev.values[i]);
    const double v_old = mb.old_values[i];
    const double ret = mb.returns[i];
    const double diff = v - v_old;
    const double vclip = v_old + std::clamp(diff, -eps, eps);
    const double l1 = (v - ret) * (v - ret), l2 = (vclip - ret) * (vclip - ret);
    out.value += std::max(l1, l2) * inv;
    double g;
    if (l1 >= l2) {
      g = 2.0 * (v - ret);
    } else {
      g = std::abs(diff) < eps ? 2.0 * (vclip - ret) : 0.0;
    }
    dval[i] = static_cast<T>(k.value_coef * g * inv);

    out.entropy += static_cast<double>(ev.entropies[i]) * inv;
    dent[i] = static_cast<T>(-k.entropy_coef * inv);
  }
  out.clip_fraction = static_cast<double>(clipped) * inv;
  out.loss = out.policy + k.value_coef * out.value - k.entropy_coef * out.entropy;
  if (!std::isfinite(out.loss) || !std::isfinite(out.policy) || !std::isfinite(out.value) ||
      !std::isfinite(out.entropy)) {
    std::ostringstream os;
    os << "non-finite PPO loss (policy " << out.policy << ", value " << out.value << ", entropy " << out.entropy
       << "); update aborted";
    throw TrainingError(os.str());
  }
  model.backward_evaluate(dlogp, dent, dval);
  return out;
}

}  // namespace towerlab::ppo
