#pragma once

// Direction-finding QPs of the two solvers in slack form.
//
// Steering QP (BFGS-SQP), variables (d, r):
//   min rho grad_f'd + sum r + 1/2 d'Hd
//   s.t. c_j + grad_c_j'd <= r_j, r_j >= 0             (inequalities)
//        +-(c_j + grad_c_j'd) <= r_j                   (equalities)
//
// Sampled QP (SQP-GS), variables (d, z, r):
//   min rho z + sum r + 1/2 d'Hd
//   s.t. f + grad_f(x_s)'d <= z                        for every objective sample
//        c_j + grad_c_j(x_s)'d <= r_j, r_j >= 0        for every sample of c_j
//        +-(c_j + grad_c_j(x_s)'d) <= r_j              (equalities)
// With rho = 0 the objective rows and z are dropped.

#include "nsopt/core.hpp"
#include "nsopt/qp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nsopt {

/// Function value at x_k plus gradients at x_k (row 0) and at sample points.
struct GradientBundle {
  double value = 0.0;
  Matrix gradients;
};

struct DirectionQp {
  QpProblem qp;
  int n = 0;
  int z_index = -1;  // -1 when there is no z variable
  int r_offset = 0;
  int num_ineq = 0;
  int num_eq = 0;
  // stacked-row bookkeeping for recovering per-constraint multipliers
  std::vector<int> row_owner;  // constraint index (ineq: j, eq: num_ineq + j), -1 for objective rows
  std::vector<double> row_sign;
};

struct Direction {
  Vector d;
  Vector r;                      // slacks, ineq then eq
  Vector constraint_multipliers; // ineq then eq (eq multipliers signed)
  double objective_weight = 0.0; // multiplier mass on the objective rows (= rho when z is present)
  double model_value = 0.0;
  QpSolution qp;
};

namespace detail {

inline void check_H(const Matrix& H, int n) {
  if (H.rows() != n || H.cols() != n) throw std::invalid_argument("Hessian approximation has wrong shape");
}

/// Appends rows for constraint bundles; shared by both assemblies.
inline void append_constraint_rows(DirectionQp& out, std::vector<Eigen::RowVectorXd>& rows, std::vector<double>& rhs,
                                   const std::vector<GradientBundle>& ineq, const std::vector<GradientBundle>& eq,
                                   int num_vars, Vector& x0, std::vector<int>& working) {
  const int n = out.n;
  for (int j = 0; j < static_cast<int>(ineq.size()); ++j) {
    const GradientBundle& b = ineq[j];
    if (b.gradients.rows() == 0 || b.gradients.cols() != n)
      throw std::invalid_argument("inequality gradient bundle has wrong shape");
    const int rj = out.r_offset + j;
    x0[rj] = std::max(b.value, 0.0);
    for (int s = 0; s < b.gradients.rows(); ++s) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(num_vars);
      row.head(n) = b.gradients.row(s);
      row[rj] = -1.0;
      if (s == 0 && b.value > 0.0) working.push_back(static_cast<int>(rows.size()));
      rows.push_back(row);
      rhs.push_back(-b.value);
      out.row_owner.push_back(j);
      out.row_sign.push_back(1.0);
    }
  }
  for (int j = 0; j < static_cast<int>(eq.size()); ++j) {
    const GradientBundle& b = eq[j];
    if (b.gradients.rows() == 0 || b.gradients.cols() != n)
      throw std::invalid_argument("equality gradient bundle has wrong shape");
    const int rj = out.r_offset + out.num_ineq + j;
    x0[rj] = std::abs(b.value);
    for (int s = 0; s < b.gradients.rows(); ++s) {
      for (double sign : {1.0, -1.0}) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(num_vars);
        row.head(n) = sign * b.gradients.row(s);
        row[rj] = -1.0;
        if (s == 0 && ((sign > 0.0) == (b.value >= 0.0))) working.push_back(static_cast<int>(rows.size()));
        rows.push_back(row);
        rhs.push_back(-sign * b.value);
        out.row_owner.push_back(out.num_ineq + j);
        out.row_sign.push_back(sign);
      }
    }
  }
}

inline void finish_assembly(DirectionQp& out, const std::vector<Eigen::RowVectorXd>& rows,
                            const std::vector<double>& rhs, int num_vars, Vector x0, std::vector<int> working,
                            const std::vector<GradientBundle>& ineq) {
  const int m = static_cast<int>(rows.size());
  out.qp.A.resize(m, num_vars);
  out.qp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    out.qp.A.row(i) = rows[i];
    out.qp.b[i] = rhs[i];
  }
  for (int j = 0; j < out.num_ineq; ++j) {
    out.qp.lower_bounds.emplace_back(out.r_offset + j, 0.0);
    if (!(ineq[j].value > 0.0)) working.push_back(m + j);
  }
  out.qp.initial_point = std::move(x0);
  out.qp.initial_working_set = std::move(working);
}

}  // namespace detail

inline DirectionQp assemble_steering_qp(const Vector& grad_f, const std::vector<GradientBundle>& ineq,
                                        const std::vector<GradientBundle>& eq, double rho, const Matrix& H) {
  const int n = static_cast<int>(grad_f.size());
  detail::check_H(H, n);
  if (!(rho >= 0.0)) throw std::invalid_argument("penalty parameter must be >= 0");
  DirectionQp out;
  out.n = n;
  out.num_ineq = static_cast<int>(ineq.size());
  out.num_eq = static_cast<int>(eq.size());
  out.r_offset = n;
  const int num_vars = n + out.num_ineq + out.num_eq;
  out.qp.H = Matrix::Zero(num_vars, num_vars);
  out.qp.H.topLeftCorner(n, n) = H;
  out.qp.g = Vector::Zero(num_vars);
  out.qp.g.head(n) = rho * grad_f;
  out.qp.g.tail(num_vars - n).setOnes();
  Vector x0 = Vector::Zero(num_vars);
  std::vector<int> working;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  detail::append_constraint_rows(out, rows, rhs, ineq, eq, num_vars, x0, working);
  detail::finish_assembly(out, rows, rhs, num_vars, std::move(x0), std::move(working), ineq);
  return out;
}

/// Same as above from a point evaluation (one gradient per function).
inline DirectionQp assemble_steering_qp(const PointEvaluation& e, double rho, const Matrix& H) {
  std::vector<GradientBundle> ineq, eq;
  for (int j = 0; j < e.c_ineq.size(); ++j) ineq.push_back({e.c_ineq[j], e.jac_ineq.row(j)});
  for (int j = 0; j < e.c_eq.size(); ++j) eq.push_back({e.c_eq[j], e.jac_eq.row(j)});
  return assemble_steering_qp(e.grad_f, ineq, eq, rho, H);
}

inline DirectionQp assemble_sqpgs_qp(const GradientBundle& objective, const std::vector<GradientBundle>& ineq,
                                     const std::vector<GradientBundle>& eq, double rho, const Matrix& H) {
  const int n = static_cast<int>(objective.gradients.cols());
  if (objective.gradients.rows() == 0) throw std::invalid_argument("objective gradient bundle is empty");
  detail::check_H(H, n);
  if (!(rho >= 0.0)) throw std::invalid_argument("penalty parameter must be >= 0");
  DirectionQp out;
  out.n = n;
  out.num_ineq = static_cast<int>(ineq.size());
  out.num_eq = static_cast<int>(eq.size());
  const bool with_z = rho > 0.0;
  out.z_index = with_z ? n : -1;
  out.r_offset = with_z ? n + 1 : n;
  const int num_vars = out.r_offset + out.num_ineq + out.num_eq;
  out.qp.H = Matrix::Zero(num_vars, num_vars);
  out.qp.H.topLeftCorner(n, n) = H;
  out.qp.g = Vector::Zero(num_vars);
  if (with_z) out.qp.g[n] = rho;
  out.qp.g.tail(out.num_ineq + out.num_eq).setOnes();
  Vector x0 = Vector::Zero(num_vars);
  std::vector<int> working;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  if (with_z) {
    x0[n] = objective.value;
    for (int s = 0; s < objective.gradients.rows(); ++s) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(num_vars);
      row.head(n) = objective.gradients.row(s);
      row[n] = -1.0;
      if (s == 0) working.push_back(0);
      rows.push_back(row);
      rhs.push_back(-objective.value);
      out.row_owner.push_back(-1);
      out.row_sign.push_back(1.0);
    }
  }
  detail::append_constraint_rows(out, rows, rhs, ineq, eq, num_vars, x0, working);
  detail::finish_assembly(out, rows, rhs, num_vars, std::move(x0), std::move(working), ineq);
  return out;
}

/// Solves an assembled direction QP. Throws QpError on failure.
inline Direction solve_direction(const DirectionQp& dq, const QpOptions& opt = {}) {
  Direction out;
  out.qp = solve_qp(dq.qp, opt);
  const Vector& w = out.qp.x;
  out.d = w.head(dq.n);
  out.r = w.segment(dq.r_offset, dq.num_ineq + dq.num_eq);
  out.constraint_multipliers = Vector::Zero(dq.num_ineq + dq.num_eq);
  for (std::size_t i = 0; i < dq.row_owner.size(); ++i) {
    const double l = out.qp.lambda[static_cast<int>(i)];
    if (dq.row_owner[i] < 0)
      out.objective_weight += l;
    else
      out.constraint_multipliers[dq.row_owner[i]] += dq.row_sign[i] * l;
  }
  out.model_value = out.qp.objective;
  return out;
}

/// Predicted reduction in total violation: v(x) minus the violation of the
/// linearized constraints at x + d.
inline double linearized_violation_reduction(const PointEvaluation& e, const Vector& d) {
  double v = violation(e.c_ineq, e.c_eq);
  double lin = 0.0;
  if (e.c_ineq.size() > 0) lin += (e.c_ineq + e.jac_ineq * d).cwiseMax(0.0).sum();
  if (e.c_eq.size() > 0) lin += (e.c_eq + e.jac_eq * d).cwiseAbs().sum();
  return v - lin;
}

}  // namespace nsopt
