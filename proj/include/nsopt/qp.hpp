#pragma once

// Dense convex QP
//
//   min 1/2 x'Hx + g'x   s.t.  A x <= b,  x_i >= l_i (designated i)
//
// solved by a primal active-set method. Each iteration factors the KKT matrix of
// the working set from scratch (the sizes here are a few dozen). H only needs to
// be positive definite on the null space of the working set. That covers the
// slack formulations of the direction subproblems, where slack variables carry
// linear cost only and every slack is pinned by at least one working constraint.

#include "nsopt/core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsopt {

class QpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A;  // may have zero rows
  Vector b;
  std::vector<std::pair<int, double>> lower_bounds;  // (index, bound): x_index >= bound

  /// Optional feasible starting point and an independent working set (indices
  /// into the stacked rows [A; bounds]) that makes the reduced Hessian definite.
  std::optional<Vector> initial_point;
  std::vector<int> initial_working_set;

  int dimension() const { return static_cast<int>(g.size()); }
  int num_rows() const { return static_cast<int>(A.rows() + lower_bounds.size()); }

  /// Stacked constraint system C x <= d including the lower bounds as -x_i <= -l_i.
  std::pair<Matrix, Vector> stacked() const {
    const int n = dimension();
    const int m = static_cast<int>(A.rows());
    Matrix C = Matrix::Zero(num_rows(), n);
    Vector d(num_rows());
    if (m > 0) {
      C.topRows(m) = A;
      d.head(m) = b;
    }
    for (std::size_t i = 0; i < lower_bounds.size(); ++i) {
      C(m + static_cast<int>(i), lower_bounds[i].first) = -1.0;
      d[m + static_cast<int>(i)] = -lower_bounds[i].second;
    }
    return {C, d};
  }

  void validate() const {
    const int n = dimension();
    if (n == 0) throw std::invalid_argument("QP has no variables");
    if (H.rows() != n || H.cols() != n) throw std::invalid_argument("QP Hessian has wrong shape");
    if (A.rows() > 0 && A.cols() != n) throw std::invalid_argument("QP constraint matrix has wrong shape");
    if (b.size() != A.rows()) throw std::invalid_argument("QP right-hand side has wrong size");
    for (auto [i, l] : lower_bounds)
      if (i < 0 || i >= n) throw std::invalid_argument("QP bound index out of range");
    if (!(H - H.transpose()).isZero(1e-12 * (1.0 + H.cwiseAbs().maxCoeff())))
      throw std::invalid_argument("QP Hessian is not symmetric");
  }
};

struct QpSolution {
  Vector x;
  Vector lambda;  // one multiplier per stacked row, >= 0
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::vector<int> active_set;
  bool interior_point = false;  // produced by the fallback solver
};

struct QpOptions {
  double kkt_tol = 1e-10;
  int max_iterations = 0;  // active-set cap; 0: 3 (n + rows) + 20
  int bland_after = -1;    // -1: 3 n
  bool interior_point_fallback = true;
};

/// max of stationarity, primal infeasibility, multiplier sign and complementarity violations.
inline double kkt_residual(const Matrix& H, const Vector& g, const Matrix& C, const Vector& d, const Vector& x,
                           const Vector& lambda) {
  Vector stat = H * x + g;
  if (C.rows() > 0) stat += C.transpose() * lambda;
  double r = stat.cwiseAbs().maxCoeff();
  if (C.rows() > 0) {
    Vector slack = C * x - d;
    r = std::max(r, std::max(0.0, slack.maxCoeff()));
    r = std::max(r, std::max(0.0, -lambda.minCoeff()));
    r = std::max(r, lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return r;
}

namespace detail {

struct ActiveSetResult {
  Vector x;
  Vector lambda;
  std::vector<int> working;
  int iterations = 0;
};

/// Equality-constrained step for working set W: H p + C_W' mu = -(H x + g), C_W p = 0.
/// With `absolute`, solves for the point itself: H y + C_W' mu = -g, C_W y = d_W.
inline bool solve_working_kkt(const Matrix& H, const Vector& g, const Matrix& C, const Vector& d,
                              const std::vector<int>& W, const Vector& x, bool absolute, Vector& out,
                              Vector& mu) {
  const int n = static_cast<int>(H.rows());
  const int w = static_cast<int>(W.size());
  Matrix K = Matrix::Zero(n + w, n + w);
  K.topLeftCorner(n, n) = H;
  for (int i = 0; i < w; ++i) {
    K.block(0, n + i, n, 1) = C.row(W[i]).transpose();
    K.block(n + i, 0, 1, n) = C.row(W[i]);
  }
  Vector rhs(n + w);
  if (absolute) {
    rhs.head(n) = -g;
    for (int i = 0; i < w; ++i) rhs[n + i] = d[W[i]];
  } else {
    rhs.head(n) = -(H * x + g);
    rhs.tail(w).setZero();
  }
  Eigen::PartialPivLU<Matrix> lu(K);
  Vector sol = lu.solve(rhs);
  // one round of iterative refinement
  Vector res = rhs - K * sol;
  sol += lu.solve(res);
  if (!sol.allFinite()) return false;
  const double scale = 1.0 + rhs.cwiseAbs().maxCoeff() + K.cwiseAbs().maxCoeff() * sol.cwiseAbs().maxCoeff();
  if ((K * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) return false;  // singular working set
  out = sol.head(n);
  mu = sol.tail(w);
  return true;
}

inline ActiveSetResult primal_active_set(const Matrix& H, const Vector& g, const Matrix& C, const Vector& d,
                                         Vector x, std::vector<int> W, const QpOptions& opt) {
  const int n = static_cast<int>(H.rows());
  const int rows = static_cast<int>(C.rows());
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 3 * (n + rows) + 20;
  const int bland_after = opt.bland_after >= 0 ? opt.bland_after : 3 * n;
  std::vector<char> in_w(rows, 0);
  for (int i : W) in_w[i] = 1;
  Vector row_norm(rows);
  for (int i = 0; i < rows; ++i) row_norm[i] = C.row(i).norm();

  ActiveSetResult out;
  Vector p, mu;
  bool at_subspace_minimum = false;  // set after a full, unblocked step
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    if (!solve_working_kkt(H, g, C, d, W, x, false, p, mu))
      throw QpError("singular KKT system in active-set iteration");
    const double xs = 1.0 + x.cwiseAbs().maxCoeff();
    const bool bland = it >= bland_after;
    const double gs = 1.0 + (H * x + g).cwiseAbs().maxCoeff();
    const bool negligible = p.cwiseAbs().maxCoeff() <= 1e-13 * xs && (H * p).cwiseAbs().maxCoeff() <= 1e-13 * gs;
    if (at_subspace_minimum || negligible) {
      at_subspace_minimum = false;
      // stationary on the working set: check multiplier signs
      int drop = -1;
      double most_negative = -1e-13 * gs;
      for (int i = 0; i < static_cast<int>(W.size()); ++i) {
        if (mu[i] < most_negative) {
          if (bland) {
            if (drop < 0 || W[i] < W[drop]) drop = i;
          } else {
            most_negative = mu[i];
            drop = i;
          }
        }
      }
      if (drop < 0) {
        out.x = x;
        out.lambda = Vector::Zero(rows);
        for (int i = 0; i < static_cast<int>(W.size()); ++i) out.lambda[W[i]] = std::max(0.0, mu[i]);
        out.working = W;
        return out;
      }
      in_w[W[drop]] = 0;
      W.erase(W.begin() + drop);
      continue;
    }
    // ratio test against constraints outside the working set
    double alpha = 1.0;
    int block = -1;
    const double pn = p.norm();
    for (int i = 0; i < rows; ++i) {
      if (in_w[i]) continue;
      const double cp = C.row(i).dot(p);
      if (cp <= 1e-12 * row_norm[i] * pn) continue;
      const double room = std::max(0.0, d[i] - C.row(i).dot(x));
      const double a = room / cp;
      if (a < alpha || (a == alpha && block >= 0 && i < block)) {
        alpha = a;
        block = i;
      }
    }
    x += alpha * p;
    at_subspace_minimum = block < 0;
    if (block >= 0) {
      W.push_back(block);
      in_w[block] = 1;
    }
  }
  throw QpError("QP active-set iteration limit reached");
}

/// Mehrotra predictor-corrector for min 1/2 x'Hx + g'x, Cx + s = d, s >= 0.
/// Used when the active-set iteration stalls on degenerate working sets.
inline ActiveSetResult interior_point(const Matrix& H, const Vector& g, const Matrix& C, const Vector& d,
                                      const Vector& x_start, int max_iter = 200) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(C.rows());
  ActiveSetResult out;
  Vector x = x_start;
  if (m == 0) {
    Eigen::LDLT<Matrix> ldlt(H);
    out.x = ldlt.solve(-g);
    out.lambda = Vector();
    if (!out.x.allFinite()) throw QpError("interior point: singular unconstrained QP");
    return out;
  }
  Vector s = (d - C * x).cwiseMax(1.0);
  Vector z = Vector::Ones(m);
  const double data_scale = 1.0 + std::max({H.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff(),
                                            C.cwiseAbs().maxCoeff(), d.cwiseAbs().maxCoeff()});
  // augmented system [H C'; C -S/Z] [dx; dz] = [-rd; -rp + rc/z], ds = -(rc + s dz)/z
  auto newton = [&](const Vector& rd, const Vector& rp, const Vector& rc, const Eigen::PartialPivLU<Matrix>& K,
                    Vector& dx, Vector& ds, Vector& dz) {
    Vector rhs(n + m);
    rhs.head(n) = -rd;
    rhs.tail(m) = -rp + rc.cwiseQuotient(z);
    const Vector sol = K.solve(rhs);
    dx = sol.head(n);
    dz = sol.tail(m);
    ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);
  };
  auto max_step = [](const Vector& v, const Vector& dv) {
    double a = 1.0;
    for (int i = 0; i < v.size(); ++i)
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    return a;
  };
  double best_merit = kInf;
  auto record_best = [&](double merit, int it) {
    if (merit >= best_merit) return;
    best_merit = merit;
    out.x = x;
    out.lambda = z;
    out.working.clear();
    for (int i = 0; i < m; ++i)
      if (z[i] > s[i]) out.working.push_back(i);
    out.iterations = it + 1;
  };
  for (int it = 0; it < max_iter; ++it) {
    const Vector rd = H * x + g + C.transpose() * z;
    const Vector rp = C * x + s - d;
    const double mu = s.dot(z) / m;
    const double merit = std::max({rd.cwiseAbs().maxCoeff() / data_scale, rp.cwiseAbs().maxCoeff() / data_scale,
                                   s.cwiseProduct(z).maxCoeff()});
    record_best(merit, it);
    if (merit <= 1e-13) return out;
    Matrix K(n + m, n + m);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, m) = C.transpose();
    K.bottomLeftCorner(m, n) = C;
    K.bottomRightCorner(m, m) = (-s.cwiseQuotient(z)).asDiagonal();
    const Eigen::PartialPivLU<Matrix> lu(K);
    Vector dx, ds, dz;
    // predictor
    newton(rd, rp, s.cwiseProduct(z), lu, dx, ds, dz);
    if (!dx.allFinite() || !dz.allFinite() || !ds.allFinite()) break;
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / m;
    const double sigma = std::pow(mu_aff / mu, 3);
    // corrector
    Vector rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
    newton(rd, rp, rc, lu, dx, ds, dz);
    if (!dx.allFinite() || !dz.allFinite() || !ds.allFinite()) break;
    const double a = 0.995 * std::min(max_step(s, ds), max_step(z, dz));
    x += a * dx;
    s += a * ds;
    z += a * dz;
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
  }
  if (best_merit < kInf) return out;  // best iterate; the caller verifies it
  throw QpError("interior point did not converge");
}

/// Elastic start: one extra variable t >= 0 relaxes every row at cost M t, and
/// M grows until t vanishes.
inline ActiveSetResult elastic_active_set(const Matrix& H, const Vector& g, const Matrix& C, const Vector& d,
                                          const QpOptions& opt) {
  const int n = static_cast<int>(H.rows());
  const int rows = static_cast<int>(C.rows());
  Vector x0;
  {
    Eigen::LDLT<Matrix> ldlt(H);
    x0 = ldlt.solve(-g);
    if (!x0.allFinite() || ldlt.info() != Eigen::Success) x0 = Vector::Zero(n);
  }
  const double worst = rows > 0 ? (C * x0 - d).maxCoeff() : -1.0;
  if (worst <= 0.0) return primal_active_set(H, g, C, d, x0, {}, opt);

  Matrix He = Matrix::Zero(n + 1, n + 1);
  He.topLeftCorner(n, n) = H;
  Matrix Ce = Matrix::Zero(rows + 1, n + 1);
  Ce.topLeftCorner(rows, n) = C;
  Ce.block(0, n, rows, 1).setConstant(-1.0);
  Ce(rows, n) = -1.0;  // t >= 0
  Vector de(rows + 1);
  de.head(rows) = d;
  de[rows] = 0.0;
  double M = 1e3 * (1.0 + g.cwiseAbs().maxCoeff());
  Vector xe(n + 1);
  xe.head(n) = x0;
  xe[n] = worst;
  int argworst = 0;
  (C * x0 - d).maxCoeff(&argworst);
  std::vector<int> We{argworst};
  for (int round = 0; round < 8; ++round, M *= 1e3) {
    Vector ge(n + 1);
    ge.head(n) = g;
    ge[n] = M;
    ActiveSetResult re = primal_active_set(He, ge, Ce, de, xe, We, opt);
    xe = re.x;
    We = re.working;
    if (std::find(We.begin(), We.end(), rows) != We.end() || xe[n] <= 0.0) {
      ActiveSetResult r;
      r.x = xe.head(n);
      r.lambda = re.lambda.head(rows);
      for (int i : We)
        if (i < rows) r.working.push_back(i);
      r.iterations = re.iterations;
      return r;
    }
  }
  throw QpError("QP appears infeasible");
}

}  // namespace detail

/// Solves the QP by the primal active-set method (from the supplied start, or an
/// elastic start), falling back to an interior-point solve when that iteration
/// fails or its answer does not verify.
inline QpSolution solve_qp(const QpProblem& p, const QpOptions& opt = {}) {
  p.validate();
  auto [C, d] = p.stacked();
  const int n = p.dimension();
  const int rows = static_cast<int>(C.rows());
  if (p.initial_point) {
    if (p.initial_point->size() != n) throw std::invalid_argument("QP initial point has wrong size");
    if (rows > 0 && (C * *p.initial_point - d).maxCoeff() > 1e-9 * (1.0 + d.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("QP initial point is infeasible");
  }

  auto finish = [&](detail::ActiveSetResult r, bool interior) {
    QpSolution s;
    s.x = std::move(r.x);
    s.lambda = r.lambda.size() == rows ? std::move(r.lambda) : Vector::Zero(rows);
    s.objective = 0.5 * s.x.dot(p.H * s.x) + p.g.dot(s.x);
    s.kkt_residual = kkt_residual(p.H, p.g, C, d, s.x, s.lambda);
    s.iterations = r.iterations;
    s.active_set = std::move(r.working);
    std::sort(s.active_set.begin(), s.active_set.end());
    s.interior_point = interior;
    return s;
  };
  auto verified = [&](const QpSolution& s) {
    double scale = 1.0 + p.g.cwiseAbs().maxCoeff() + p.H.cwiseAbs().maxCoeff() * s.x.cwiseAbs().maxCoeff();
    if (rows > 0) scale += d.cwiseAbs().maxCoeff() + C.cwiseAbs().maxCoeff() * s.lambda.cwiseAbs().maxCoeff();
    return s.kkt_residual <= opt.kkt_tol * scale;
  };

  std::string failure;
  try {
    detail::ActiveSetResult r = p.initial_point
                                    ? detail::primal_active_set(p.H, p.g, C, d, *p.initial_point,
                                                                p.initial_working_set, opt)
                                    : detail::elastic_active_set(p.H, p.g, C, d, opt);
    // recompute the point and multipliers directly from the final working set
    if (!r.working.empty()) {
      Vector y, mu;
      if (detail::solve_working_kkt(p.H, p.g, C, d, r.working, r.x, true, y, mu)) {
        const bool feasible = (C * y - d).maxCoeff() <= (C * r.x - d).cwiseMax(0.0).maxCoeff() + 1e-14;
        if (feasible && mu.minCoeff() >= -1e-12) {
          r.x = y;
          r.lambda.setZero();
          for (std::size_t i = 0; i < r.working.size(); ++i) r.lambda[r.working[i]] = std::max(0.0, mu[i]);
        }
      }
    }
    QpSolution s = finish(std::move(r), false);
    if (verified(s)) return s;
    failure = "active-set solution failed KKT verification";
  } catch (const QpError& e) {
    failure = e.what();
  }
  if (!opt.interior_point_fallback) throw QpError(failure);

  QpSolution s = finish(detail::interior_point(p.H, p.g, C, d, p.initial_point ? *p.initial_point : Vector::Zero(n)),
                        true);
  if (!verified(s))
    throw QpError("QP solution failed KKT verification (residual " + std::to_string(s.kkt_residual) + ")");
  return s;
}

}  // namespace nsopt
