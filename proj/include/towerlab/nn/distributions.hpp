#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"

namespace towerlab::nn {

template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw UsageError("softmax of an empty vector");
  const T m = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  return softmax(std::span<const T>(logits));
}

template <class T>
std::vector<T> log_softmax(std::span<const T> logits) {
  if (logits.empty()) throw UsageError("log_softmax of an empty vector");
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum{0};
  for (auto z : logits) sum += std::exp(z - m);
  const T lse = m + std::log(sum);
  std::vector<T> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

template <class T>
std::vector<T> log_softmax(const std::vector<T>& logits) {
  return log_softmax(std::span<const T>(logits));
}

template <class T>
void check_probabilities(std::span<const T> probs, double tol = 1e-6) {
  if (probs.empty()) throw UsageError("empty probability vector");
  double sum = 0;
  for (auto p : probs) {
    if (!(p >= 0) || !std::isfinite(static_cast<double>(p))) throw UsageError("probability vector has a negative or non-finite entry");
    sum += static_cast<double>(p);
  }
  if (std::abs(sum - 1.0) > tol) throw UsageError("probability vector sums to " + std::to_string(sum) + ", not 1");
}

// Inverse-CDF draw; one rng draw per sample.
template <class T>
std::size_t categorical_sample(std::span<const T> probs, Rng& rng) {
  check_probabilities(probs);
  const double u = uniform01(rng);
  double acc = 0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0) last_nonzero = i;
    acc += static_cast<double>(probs[i]);
    if (u < acc && probs[i] > 0) return i;
  }
  return last_nonzero;
}

template <class T>
std::size_t categorical_sample(const std::vector<T>& probs, Rng& rng) {
  return categorical_sample(std::span<const T>(probs), rng);
}

// Shannon entropy in nats, 0 ln 0 := 0.
template <class T>
T categorical_entropy(std::span<const T> probs) {
  check_probabilities(probs);
  T h{0};
  for (auto p : probs)
    if (p > 0) h -= p * std::log(p);
  return std::max(h, T{0});
}

template <class T>
T categorical_entropy(const std::vector<T>& probs) {
  return categorical_entropy(std::span<const T>(probs));
}

inline std::size_t flatten_action_space(std::span<const std::size_t> branch_sizes) {
  return std::accumulate(branch_sizes.begin(), branch_sizes.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::size_t flatten_action_space(const std::vector<std::size_t>& branch_sizes) {
  return flatten_action_space(std::span<const std::size_t>(branch_sizes));
}

}  // namespace towerlab::nn
