#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/nn/layers.hpp"

namespace towerlab::nn {

// What finite_difference_check needs from a model: its parameters, a
// forward pass returning a scalar loss, a backward pass for that loss, and
// optionally the ReLU activation pattern of the last forward pass.
template <class T>
struct GradProbe {
  std::vector<Parameter<T>*> params;
  std::function<T()> loss;
  std::function<void()> backward;
  std::function<std::vector<unsigned char>()> pattern;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double tolerance = 0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero
// up to rounding from dominating the report.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences on every parameter element. Elements whose +h or -h
// perturbation flips any ReLU unit relative to the unperturbed pass are
// skipped, since the loss is not differentiable across the kink.
template <class T>
GradCheckReport finite_difference_check(GradProbe<T>& probe, double tolerance, double h = 1e-5,
                                        std::size_t max_params = 10000) {
  std::size_t total = 0;
  for (auto* p : probe.params) total += p->value.size();
  if (total > max_params)
    throw UsageError("finite difference check over " + std::to_string(total) + " parameters exceeds limit " +
                     std::to_string(max_params));

  for (auto* p : probe.params) p->value.zero_grad();
  (void)probe.loss();
  const auto base_pattern = probe.pattern ? probe.pattern() : std::vector<unsigned char>{};
  probe.backward();
  std::vector<std::vector<T>> analytic;
  for (auto* p : probe.params) analytic.emplace_back(p->value.grad().begin(), p->value.grad().end());

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < probe.params.size(); ++pi) {
    auto* p = probe.params[pi];
    GradCheckEntry entry{p->name};
    auto data = p->value.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T orig = data[j];
      data[j] = orig + static_cast<T>(h);
      const double up = static_cast<double>(probe.loss());
      const bool kink_up = probe.pattern && probe.pattern() != base_pattern;
      data[j] = orig - static_cast<T>(h);
      const double down = static_cast<double>(probe.loss());
      const bool kink_down = probe.pattern && probe.pattern() != base_pattern;
      data[j] = orig;
      if (kink_up || kink_down) {
        ++entry.skipped;
        continue;
      }
      const double numeric = (up - down) / (2 * h);
      const double err = gradient_relative_error(static_cast<double>(analytic[pi][j]), numeric);
      ++entry.checked;
      if (err > entry.max_rel_error) entry.max_rel_error = err;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = p->name + "[" + std::to_string(j) + "]";
      }
    }
    report.checked += entry.checked;
    report.skipped += entry.skipped;
    report.entries.push_back(std::move(entry));
  }
  // Restore the unperturbed forward state.
  (void)probe.loss();
  report.passed = report.checked > 0 && report.max_rel_error < tolerance;
  return report;
}

// Probe for a Sequential network under the smooth loss sum_i c_i * y_i with
// fixed random coefficients c.
template <class T>
GradProbe<T> sequential_probe(Sequential<T>& net, const Tensor<T>& input, Rng& rng) {
  const Shape out = batch_shape(input.dim(0), net.output_shape_for(sample_shape(input.shape())));
  auto coeffs = std::make_shared<Tensor<T>>(out);
  for (auto& c : coeffs->data()) c = static_cast<T>(standard_normal(rng));
  GradProbe<T> probe;
  probe.params = net.parameters();
  probe.loss = [&net, input, coeffs] {
    const auto y = net.forward(input);
    T s{0};
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * (*coeffs)[i];
    return s;
  };
  probe.backward = [&net, coeffs] { (void)net.backward(*coeffs); };
  probe.pattern = [&net] { return net.activation_pattern(); };
  return probe;
}

}  // namespace towerlab::nn
