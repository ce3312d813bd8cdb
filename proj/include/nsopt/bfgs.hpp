#pragma once

#include "nsopt/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace nsopt {

enum class BfgsOutcome { Updated, Skipped, Reset };

struct BfgsOptions {
  double curvature_tol = 1e-10;  // skip unless s'y >= curvature_tol |s||y|
  double max_eigenvalue = 1e12;
  double min_relative_eigenvalue = 1e-12;
};

/// Hessian-form BFGS: H+ = H - H s s' H / s'H s + y y' / s'y.
/// Returns the outcome and updates H in place.
inline BfgsOutcome bfgs_update(Matrix& H, const Vector& s, const Vector& y, const BfgsOptions& opt = {}) {
  if (s.size() != H.rows() || y.size() != H.rows()) throw std::invalid_argument("BFGS vectors have wrong size");
  const double sn = s.norm(), yn = y.norm();
  if (!(sn > 0.0)) throw std::invalid_argument("BFGS step must be nonzero");
  const double sy = s.dot(y);
  if (!std::isfinite(sy) || !(sy >= opt.curvature_tol * sn * yn) || sy <= 0.0) return BfgsOutcome::Skipped;
  const Vector Hs = H * s;
  const double sHs = s.dot(Hs);
  Matrix next = H - (Hs * Hs.transpose()) / sHs + (y * y.transpose()) / sy;
  next = 0.5 * (next + next.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(next, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (eig.info() != Eigen::Success || !next.allFinite() || hi > opt.max_eigenvalue ||
      !(lo > opt.min_relative_eigenvalue * hi)) {
    H = Matrix::Identity(H.rows(), H.cols());
    return BfgsOutcome::Reset;
  }
  H = std::move(next);
  return BfgsOutcome::Updated;
}

}  // namespace nsopt
