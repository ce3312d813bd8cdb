#pragma once

// BFGS-SQP with penalty-parameter steering. BFGS runs on the exact penalty
// function; the direction comes from the steering QP, and the penalty
// parameter is lowered whenever the direction does not promise enough
// reduction of the linearized violation.

#include "nsopt/bfgs.hpp"
#include "nsopt/core.hpp"
#include "nsopt/line_search.hpp"
#include "nsopt/subproblems.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace nsopt {

struct BfgsSqpConfig {
  double rho0 = 1.0;
  int max_iterations = 1000;
  double stationarity_tol = 1e-8;
  double steering_fraction = 0.1;  // c_v
  double rho_factor = 0.5;         // c_rho
  int max_steering_resolves = 10;
  double steering_violation_floor = 1e-10;  // at or below: feasible, no steering
  WolfeOptions wolfe{};
  BfgsOptions bfgs{};
  FeasibilityTolerances feasibility{};
  CostMode cost_mode = CostMode::Wall;

  void validate() const {
    if (!(rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
    if (!(stationarity_tol >= 0.0)) throw std::invalid_argument("stationarity_tol must be >= 0");
    if (!(steering_fraction > 0.0 && steering_fraction < 1.0)) throw std::invalid_argument("need 0 < c_v < 1");
    if (!(rho_factor > 0.0 && rho_factor < 1.0)) throw std::invalid_argument("need 0 < c_rho < 1");
    if (max_steering_resolves < 0) throw std::invalid_argument("max_steering_resolves must be >= 0");
    if (!(steering_violation_floor >= 0.0)) throw std::invalid_argument("steering_violation_floor must be >= 0");
    wolfe.validate();
    feasibility.validate();
  }
};

struct SteeringResult {
  Direction direction;
  double rho = 1.0;
  bool fallback = false;
  int resolves = 0;
  double stationarity = 0.0;  // |rho grad f + J' lambda|
};

/// Direction from the steering QP, lowering rho by c_rho (at most
/// max_steering_resolves times) until l(d) >= c_v l(d_ref), where d_ref solves
/// the rho = 0 problem. Falls back to d_ref if the cap is hit. Points whose
/// violation is within steering_violation_floor keep rho: there is no
/// progress toward feasibility to promote, and smaller violations are below
/// the accuracy of the QP itself.
inline SteeringResult steer_direction(const PointEvaluation& e, double rho, const Matrix& H,
                                      const BfgsSqpConfig& cfg) {
  auto certificate = [&](const Direction& dir, double r) {
    Vector g = r * e.grad_f;
    const int mi = static_cast<int>(e.c_ineq.size());
    for (int j = 0; j < mi; ++j) g += dir.constraint_multipliers[j] * e.jac_ineq.row(j).transpose();
    for (int j = 0; j < e.c_eq.size(); ++j) g += dir.constraint_multipliers[mi + j] * e.jac_eq.row(j).transpose();
    return g.norm();
  };
  SteeringResult out;
  out.rho = rho;
  out.direction = solve_direction(assemble_steering_qp(e, rho, H));
  const double v = violation(e.c_ineq, e.c_eq);
  double reduction = linearized_violation_reduction(e, out.direction.d);
  // l(d_ref) <= v, so this settles most iterations without the reference solve
  if (v <= cfg.steering_violation_floor || reduction >= cfg.steering_fraction * v) {
    out.stationarity = certificate(out.direction, rho);
    return out;
  }
  Direction ref = solve_direction(assemble_steering_qp(e, 0.0, H));
  const double ref_reduction = linearized_violation_reduction(e, ref.d);
  const double target = cfg.steering_fraction * ref_reduction;
  if (reduction >= target) {
    out.stationarity = certificate(out.direction, rho);
    return out;
  }
  for (int j = 1; j <= cfg.max_steering_resolves; ++j) {
    out.rho *= cfg.rho_factor;
    out.resolves = j;
    out.direction = solve_direction(assemble_steering_qp(e, out.rho, H));
    reduction = linearized_violation_reduction(e, out.direction.d);
    if (reduction >= target) {
      out.stationarity = certificate(out.direction, out.rho);
      return out;
    }
  }
  out.fallback = true;
  // a reference direction without predicted progress (e.g. at a feasible point,
  // where it is zero) is useless as a step; keep the smallest-rho candidate then
  if (ref_reduction > 0.0) {
    out.direction = std::move(ref);
    out.stationarity = certificate(out.direction, 0.0);
  } else {
    out.stationarity = certificate(out.direction, out.rho);
  }
  return out;
}

namespace detail {

inline std::optional<PointEvaluation> try_evaluate(const Problem& p, const Vector& x) {
  try {
    PointEvaluation e = p.evaluate(x);
    if (!std::isfinite(e.f) || !e.grad_f.allFinite() || !e.c_ineq.allFinite() || !e.c_eq.allFinite() ||
        !e.jac_ineq.allFinite() || !e.jac_eq.allFinite())
      return std::nullopt;
    return e;
  } catch (const EvaluationError&) {
    return std::nullopt;
  }
}

/// Record for a starting point that could not be evaluated.
inline IterateRecord unevaluable_record(const Problem& p, const Vector& x, double rho) {
  IterateRecord r;
  r.k = 0;
  r.x = x;
  r.f = kInf;
  r.c_ineq = Vector::Constant(p.num_inequalities(), kInf);
  r.c_eq = Vector::Constant(p.num_equalities(), kInf);
  r.rho = rho;
  r.stationarity = kInf;
  return r;
}

inline bool stationary_and_feasible(double stationarity, double tol, const PointEvaluation& e,
                                    const FeasibilityTolerances& feas) {
  return stationarity <= tol && inequality_violation(e.c_ineq) == 0.0 &&
         equality_violation(e.c_eq) <= feas.eq_viol_tol;
}

}  // namespace detail

inline RunHistory run_bfgs_sqp(const Problem& problem, const Vector& x0, const BfgsSqpConfig& cfg) {
  problem.validate();
  cfg.validate();
  if (x0.size() != problem.dimension) throw std::invalid_argument("starting point has wrong dimension");
  RunHistory h;
  h.solver = "bfgs-sqp";
  CostClock clock(cfg.cost_mode);

  std::optional<PointEvaluation> cur = detail::try_evaluate(problem, x0);
  if (!cur) {
    h.iterates.push_back(detail::unevaluable_record(problem, x0, cfg.rho0));
    h.termination = Termination::EvaluationFailure;
    return h;
  }
  double rho = cfg.rho0;
  Matrix H = Matrix::Identity(problem.dimension, problem.dimension);
  h.iterates.push_back(make_record(0, *cur, rho, 0.0, 0.0));

  for (int k = 0;; ++k) {
    SteeringResult steer;
    try {
      steer = steer_direction(*cur, rho, H, cfg);
    } catch (const QpError&) {
      h.termination = Termination::SubproblemFailure;
      break;
    }
    if (steer.fallback) ++h.steering_fallbacks;
    rho = steer.rho;
    h.iterates.back().rho = rho;
    h.iterates.back().stationarity = steer.stationarity;
    if (detail::stationary_and_feasible(steer.stationarity, cfg.stationarity_tol, *cur, cfg.feasibility)) {
      h.termination = Termination::Stationarity;
      break;
    }
    if (k >= cfg.max_iterations) {
      h.termination = Termination::MaxIterations;
      break;
    }
    // a fallback direction may carry rho = 0 semantics; the line search uses the capped rho
    const Vector& d = steer.direction.d;
    const Vector g0 = penalty_gradient(rho, *cur);
    const double phi0 = penalty_value(rho, *cur);
    const double dphi0 = g0.dot(d);
    if (!(dphi0 < 0.0) || !d.allFinite()) {
      h.termination = Termination::LineSearchFailure;
      break;
    }
    auto trial = [&](double t) -> std::optional<LineTrial<PointEvaluation>> {
      std::optional<PointEvaluation> e = detail::try_evaluate(problem, cur->x + t * d);
      if (!e) return std::nullopt;
      LineTrial<PointEvaluation> lt;
      lt.phi = penalty_value(rho, *e);
      lt.dphi = penalty_gradient(rho, *e).dot(d);
      lt.payload = std::move(*e);
      return lt;
    };
    LineSearchResult<PointEvaluation> ls = armijo_wolfe_search<PointEvaluation>(phi0, dphi0, trial, cfg.wolfe);
    if (ls.status == LineSearchStatus::Failure) {
      h.termination = Termination::LineSearchFailure;
      break;
    }
    PointEvaluation next = std::move(ls.trial.payload);
    const Vector s = next.x - cur->x;
    if (s.norm() > 0.0) bfgs_update(H, s, penalty_gradient(rho, next) - g0, cfg.bfgs);
    cur = std::move(next);
    h.iterates.push_back(make_record(k + 1, *cur, rho, clock.stamp(k + 1), 0.0));
  }
  clock.finalize(h);
  return h;
}

}  // namespace nsopt
