#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/nn/tensor.hpp"

namespace towerlab::nn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  std::uint64_t step = 0;
  AdamHyper hyper;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// One Adam step with bias correction over `params`, reading each
// parameter's grad slot. Moments are allocated (zeroed) on the first call.
// Any non-finite gradient aborts the update before anything is modified.
template <class T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state, double lr) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->value.size(), T{0});
      state.v.emplace_back(p->value.size(), T{0});
    }
  }
  if (state.m.size() != params.size()) throw UsageError("adam state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i]->value;
    if (state.m[i].size() != t.size()) throw UsageError("adam moment shape mismatch for " + params[i]->name);
    for (auto g : t.grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw TrainingError("non-finite gradient in '" + params[i]->name + "', update aborted");
  }

  state.step += 1;
  const auto& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(h.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i]->value;
    auto data = t.data();
    auto grad = t.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      data[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <class T>
void adam_step(std::vector<Parameter<T>*>& params, AdamState<T>& state, double lr) {
  adam_step(std::span<Parameter<T>* const>(params), state, lr);
}

}  // namespace towerlab::nn
