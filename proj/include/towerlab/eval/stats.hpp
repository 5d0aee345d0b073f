#pragma once

#include <cmath>
#include <vector>

namespace towerlab::eval {

inline double mean_of(const std::vector<double>& x) {
  if (x.empty()) return std::nan("");
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Population variance.
inline double variance_of(const std::vector<double>& x) {
  if (x.empty()) return std::nan("");
  const double m = mean_of(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

// Asymmetric deviation about the mean: the upward band is the RMS of the
// positive deviations, the downward band the RMS of the negative ones. Each
// RMS is taken over the samples on its own side; a side with no samples
// gets 0.
struct AsymmetricDeviation {
  double up = 0;
  double down = 0;
};

inline AsymmetricDeviation asymmetric_deviation(const std::vector<double>& x) {
  AsymmetricDeviation d;
  if (x.empty()) return d;
  const double m = mean_of(x);
  double su = 0, sd = 0;
  int nu = 0, nd = 0;
  for (double v : x) {
    if (v > m) {
      su += (v - m) * (v - m);
      ++nu;
    } else if (v < m) {
      sd += (v - m) * (v - m);
      ++nd;
    }
  }
  d.up = nu ? std::sqrt(su / nu) : 0.0;
  d.down = nd ? std::sqrt(sd / nd) : 0.0;
  return d;
}

}  // namespace towerlab::eval
