#pragma once

#include <Eigen/Dense>

#include <algorithm>

#include "towerlab/core/rng.hpp"
#include "towerlab/nn/layers.hpp"

namespace towerlab::nn {

// Fills `weight` (viewed as [rows, numel/rows]) with a gain-scaled
// orthogonal matrix: QR of a Gaussian matrix with the sign of R's diagonal
// folded into Q.
template <class T>
void orthogonal_init(Tensor<T>& weight, double gain, Rng& rng) {
  const auto rows = static_cast<Eigen::Index>(weight.dim(0));
  const auto cols = static_cast<Eigen::Index>(weight.size() / weight.dim(0));
  const bool transpose = rows < cols;
  const Eigen::Index r = transpose ? cols : rows;
  const Eigen::Index c = transpose ? rows : cols;
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(c, c).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  auto data = weight.data();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      data[static_cast<std::size_t>(i * cols + j)] = static_cast<T>(gain * (transpose ? q(j, i) : q(i, j)));
}

template <class T>
void zero_fill(Tensor<T>& t) {
  std::fill(t.data().begin(), t.data().end(), T{0});
}

// Orthogonal weights and zero bias for every conv/dense layer in `net`.
template <class T>
void init_sequential(Sequential<T>& net, double gain, Rng& rng) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto params = net[i].parameters();
    if (params.size() == 2) {
      orthogonal_init(params[0]->value, gain, rng);
      zero_fill(params[1]->value);
    }
  }
}

}  // namespace towerlab::nn
