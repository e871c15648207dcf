#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "flmens/data.hpp"

namespace flmens {

struct PCAProjector {
  Vector mean;                 // d
  Matrix components;           // d x r, orthonormal columns
  Vector explained_variance;   // r, non-increasing

  Eigen::Index input_dim() const noexcept { return components.rows(); }
  Eigen::Index output_dim() const noexcept { return components.cols(); }
};

// Top-r eigenvectors of the sample covariance (divisor m - 1). Each
// component is oriented so that its largest-magnitude entry is positive
// (first such entry on exact ties).
inline PCAProjector fit_pca(const Matrix& X, Eigen::Index target_dim) {
  const Eigen::Index m = X.rows();
  const Eigen::Index d = X.cols();
  if (m < 2) throw std::invalid_argument("PCA needs at least two rows");
  if (target_dim < 1 || target_dim > std::min(m, d)) {
    throw std::invalid_argument("PCA target dimension " + std::to_string(target_dim) + " outside [1, " +
                                std::to_string(std::min(m, d)) + "]");
  }
  PCAProjector p;
  p.mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - p.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(m - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  p.components.resize(d, target_dim);
  p.explained_variance.resize(target_dim);
  for (Eigen::Index k = 0; k < target_dim; ++k) {
    const Eigen::Index src = d - 1 - k;
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    }
    if (v(arg) < 0.0) v = -v;
    p.components.col(k) = v;
    p.explained_variance(k) = std::max(0.0, solver.eigenvalues()(src));
  }
  return p;
}

// (X - mean) * components
inline Matrix project(const PCAProjector& projector, const Matrix& X) {
  if (X.cols() != projector.input_dim()) {
    throw std::invalid_argument("projection expects " + std::to_string(projector.input_dim()) +
                                " columns, got " + std::to_string(X.cols()));
  }
  return (X.rowwise() - projector.mean.transpose()) * projector.components;
}

}  // namespace flmens
