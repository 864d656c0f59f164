// Copyright 2026 The critproc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "critproc/error.hpp"
#include "critproc/matrix.hpp"

namespace critproc {

struct PcaModel {
  std::vector<double> mean;                // p
  Matrix components;                       // q x p, orthonormal rows
  std::vector<double> explained_variance;  // q, non-increasing
};

// Principal axes of the mean-centred population covariance (divide by n).
// Each component is oriented so that its largest-magnitude entry is
// positive; the first such entry wins on exact magnitude ties.
inline PcaModel pca_fit(const Matrix& x, std::size_t q) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (n < 2) throw Error(Errc::kEmptyData, "pca needs at least 2 rows");
  if (q < 1 || q > std::min(n - 1, p))
    throw Error(Errc::kInvalidConfig, "q must lie in [1, min(n-1, p)]");
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteInput, "matrix contains NaN or Inf");

  PcaModel model;
  model.mean.assign(p, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) model.mean[c] += x(r, c);
  for (auto& m : model.mean) m /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) centered(r, c) = x(r, c) - model.mean[c];
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::kNonFiniteInput, "covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return solver.eigenvalues()(static_cast<Eigen::Index>(a)) >
           solver.eigenvalues()(static_cast<Eigen::Index>(b));
  });

  model.components = Matrix(q, p);
  model.explained_variance.resize(q);
  for (std::size_t k = 0; k < q; ++k) {
    const auto col = static_cast<Eigen::Index>(order[k]);
    model.explained_variance[k] = std::max(0.0, solver.eigenvalues()(col));
    std::size_t pivot = 0;
    for (std::size_t c = 1; c < p; ++c)
      if (std::abs(solver.eigenvectors()(static_cast<Eigen::Index>(c), col)) >
          std::abs(solver.eigenvectors()(static_cast<Eigen::Index>(pivot), col)))
        pivot = c;
    const double sign =
        solver.eigenvectors()(static_cast<Eigen::Index>(pivot), col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t c = 0; c < p; ++c)
      model.components(k, c) = sign * solver.eigenvectors()(static_cast<Eigen::Index>(c), col);
  }
  return model;
}

inline Matrix pca_transform(const PcaModel& model, const Matrix& x) {
  const std::size_t p = model.mean.size();
  if (x.cols() != p)
    throw Error(Errc::kDimensionMismatch, "expected " + std::to_string(p) + " columns, got " +
                                              std::to_string(x.cols()));
  const std::size_t q = model.components.rows();
  Matrix scores(x.rows(), q);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < q; ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) s += (x(r, c) - model.mean[c]) * model.components(k, c);
      scores(r, k) = s;
    }
  return scores;
}

// scores * components + mean.
inline Matrix pca_reconstruct(const PcaModel& model, const Matrix& scores) {
  const std::size_t p = model.mean.size();
  const std::size_t q = model.components.rows();
  if (scores.cols() != q) throw Error(Errc::kDimensionMismatch, "score width != q");
  Matrix x(scores.rows(), p);
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t c = 0; c < p; ++c) {
      double s = model.mean[c];
      for (std::size_t k = 0; k < q; ++k) s += scores(r, k) * model.components(k, c);
      x(r, c) = s;
    }
  return x;
}

}  // namespace critproc
