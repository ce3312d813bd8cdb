#pragma once

// SQP with gradient sampling. Nonsmooth functions contribute gradients at random
// points of an epsilon-ball around the iterate in addition to the center
// gradient; the sampling radius and the stationarity trigger shrink whenever the
// sampled model is stationary to the current trigger.

#include "nsopt/bfgs.hpp"
#include "nsopt/bfgs_sqp.hpp"
#include "nsopt/core.hpp"
#include "nsopt/line_search.hpp"
#include "nsopt/subproblems.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace nsopt {

struct SqpGsConfig {
  int samples = -1;  // per nonsmooth function; -1: 2n, 0: no sampling (test mode)
  double eps0 = 0.1;
  double eps_factor = 0.1;
  double eps_min = 1e-6;
  double nu0 = 0.1;
  double nu_factor = 0.1;
  double rho0 = 1.0;
  double rho_factor = 0.5;
  int rho_patience = 5;  // consecutive iterations with a positive slack before rho shrinks
  int max_iterations = 1000;
  double stationarity_tol = 1e-8;
  BacktrackingOptions backtracking{};
  BfgsOptions bfgs{};
  FeasibilityTolerances feasibility{};
  std::uint64_t seed = 0;
  CostMode cost_mode = CostMode::Wall;

  int sample_count(int n) const { return samples < 0 ? 2 * n : samples; }

  void validate(int n) const {
    const int m = sample_count(n);
    if (m != 0 && m < n + 1) throw std::invalid_argument("need at least n+1 samples per nonsmooth function");
    if (!(eps0 > 0.0) || !(eps_min > 0.0) || eps_min > eps0) throw std::invalid_argument("need 0 < eps_min <= eps0");
    if (!(nu0 > 0.0)) throw std::invalid_argument("nu0 must be positive");
    for (double f : {eps_factor, nu_factor, rho_factor, backtracking.factor})
      if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("reduction factors must lie in (0,1)");
    if (!(rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
    if (rho_patience < 1) throw std::invalid_argument("rho_patience must be >= 1");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
    if (!(backtracking.c1 > 0.0 && backtracking.c1 < 1.0)) throw std::invalid_argument("need 0 < c1 < 1");
    feasibility.validate();
  }
};

/// `count` points uniform in the closed eps-ball around x.
inline Matrix draw_ball_points(const Vector& x, double eps, int count, std::mt19937_64& rng) {
  if (!(eps >= 0.0)) throw std::invalid_argument("sampling radius must be >= 0");
  const int n = static_cast<int>(x.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix P(count, n);
  for (int s = 0; s < count; ++s) {
    Vector u(n);
    double nrm = 0.0;
    do {
      for (int i = 0; i < n; ++i) u[i] = normal(rng);
      nrm = u.norm();
    } while (nrm == 0.0);
    const double radius = eps * std::pow(uniform(rng), 1.0 / n);
    P.row(s) = (x + (radius / nrm) * u).transpose();
  }
  return P;
}

/// Gradient bundles for every function: the center gradient from `e`, plus
/// gradients at sampled points for the functions flagged nonsmooth. A sample
/// whose evaluation fails is redrawn up to 10 times.
struct SampleSet {
  GradientBundle objective;
  std::vector<GradientBundle> ineq;
  std::vector<GradientBundle> eq;
  Matrix points;
  int gradient_evaluations = 0;  // sampled evaluations only
};

inline SampleSet draw_samples(const Problem& p, const PointEvaluation& e, double eps, int count,
                              std::mt19937_64& rng) {
  if (count < 0) throw std::invalid_argument("sample count must be >= 0");
  SampleSet out;
  out.points = Matrix(0, p.dimension);
  std::vector<const ScalarFunction*> nonsmooth;
  if (p.objective.nonsmooth) nonsmooth.push_back(&p.objective);
  for (const auto& c : p.inequalities)
    if (c.nonsmooth) nonsmooth.push_back(&c);
  for (const auto& c : p.equalities)
    if (c.nonsmooth) nonsmooth.push_back(&c);

  std::vector<std::vector<Vector>> grads(nonsmooth.size());
  if (!nonsmooth.empty() && count > 0) {
    out.points = draw_ball_points(e.x, eps, count, rng);
    for (int s = 0; s < count; ++s) {
      bool ok = false;
      for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
        if (attempt > 0) out.points.row(s) = draw_ball_points(e.x, eps, 1, rng).row(0);
        const Vector y = out.points.row(s).transpose();
        std::vector<Vector> g(nonsmooth.size());
        try {
          for (std::size_t f = 0; f < nonsmooth.size(); ++f) {
            FunctionValue v = p.evaluate_function(*nonsmooth[f], y);
            ++out.gradient_evaluations;
            if (!v.gradient.allFinite()) throw EvaluationError("non-finite sampled gradient");
            g[f] = std::move(v.gradient);
          }
          ok = true;
        } catch (const EvaluationError&) {
          continue;
        }
        for (std::size_t f = 0; f < nonsmooth.size(); ++f) grads[f].push_back(std::move(g[f]));
      }
      if (!ok) throw EvaluationError("gradient sampling failed after 10 retries");
    }
  }
  auto bundle = [&](const ScalarFunction& fn, double value, const Vector& center) {
    GradientBundle b;
    b.value = value;
    std::size_t idx = nonsmooth.size();
    for (std::size_t f = 0; f < nonsmooth.size(); ++f)
      if (nonsmooth[f] == &fn) idx = f;
    const int extra = idx < nonsmooth.size() ? static_cast<int>(grads[idx].size()) : 0;
    b.gradients.resize(1 + extra, center.size());
    b.gradients.row(0) = center.transpose();
    for (int s = 0; s < extra; ++s) b.gradients.row(1 + s) = grads[idx][s].transpose();
    return b;
  };
  out.objective = bundle(p.objective, e.f, e.grad_f);
  for (int j = 0; j < p.num_inequalities(); ++j)
    out.ineq.push_back(bundle(p.inequalities[j], e.c_ineq[j], e.jac_ineq.row(j).transpose()));
  for (int j = 0; j < p.num_equalities(); ++j)
    out.eq.push_back(bundle(p.equalities[j], e.c_eq[j], e.jac_eq.row(j).transpose()));
  return out;
}

struct SampledDirection {
  Direction direction;
  double stationarity = 0.0;  // |d|_H
};

inline SampledDirection sqpgs_direction(const SampleSet& samples, double rho, const Matrix& H) {
  SampledDirection out;
  out.direction = solve_direction(assemble_sqpgs_qp(samples.objective, samples.ineq, samples.eq, rho, H));
  const Vector& d = out.direction.d;
  out.stationarity = std::sqrt(std::max(0.0, d.dot(H * d)));
  return out;
}

namespace detail {

/// rho grad f + sum lambda_j grad c_j at the center gradients.
inline Vector lagrangian_gradient(const PointEvaluation& e, double rho, const Vector& multipliers) {
  Vector g = rho * e.grad_f;
  const int mi = static_cast<int>(e.c_ineq.size());
  for (int j = 0; j < mi; ++j) g += multipliers[j] * e.jac_ineq.row(j).transpose();
  for (int j = 0; j < e.c_eq.size(); ++j) g += multipliers[mi + j] * e.jac_eq.row(j).transpose();
  return g;
}

}  // namespace detail

inline RunHistory run_sqp_gs(const Problem& problem, const Vector& x0, const SqpGsConfig& cfg) {
  problem.validate();
  cfg.validate(problem.dimension);
  if (x0.size() != problem.dimension) throw std::invalid_argument("starting point has wrong dimension");
  RunHistory h;
  h.solver = "sqp-gs";
  h.seed = cfg.seed;
  CostClock clock(cfg.cost_mode);
  std::mt19937_64 rng(cfg.seed);

  std::optional<PointEvaluation> cur = detail::try_evaluate(problem, x0);
  if (!cur) {
    h.iterates.push_back(detail::unevaluable_record(problem, x0, cfg.rho0));
    h.termination = Termination::EvaluationFailure;
    return h;
  }
  const int m = cfg.sample_count(problem.dimension);
  double rho = cfg.rho0, eps = cfg.eps0, nu = cfg.nu0;
  int positive_slack_streak = 0;
  Matrix H = Matrix::Identity(problem.dimension, problem.dimension);
  h.iterates.push_back(make_record(0, *cur, rho, 0.0, 0.0));

  for (int k = 0;; ++k) {
    SampledDirection dir;
    try {
      SampleSet samples = draw_samples(problem, *cur, eps, m, rng);
      dir = sqpgs_direction(samples, rho, H);
    } catch (const QpError&) {
      h.termination = Termination::SubproblemFailure;
      break;
    } catch (const EvaluationError&) {
      h.termination = Termination::EvaluationFailure;
      break;
    }
    h.iterates.back().stationarity = dir.stationarity;
    const bool eps_floor = eps <= cfg.eps_min;
    const bool nu_floor = nu <= cfg.stationarity_tol;
    if (dir.stationarity <= cfg.stationarity_tol && eps_floor && nu_floor &&
        detail::stationary_and_feasible(0.0, 0.0, *cur, cfg.feasibility)) {
      h.termination = Termination::Stationarity;
      break;
    }
    if (k >= cfg.max_iterations) {
      h.termination = Termination::MaxIterations;
      break;
    }

    // penalty update from persistent positive slacks
    if (dir.direction.r.size() > 0 && dir.direction.r.maxCoeff() > 0.0)
      ++positive_slack_streak;
    else
      positive_slack_streak = 0;
    double next_rho = rho;
    if (positive_slack_streak >= cfg.rho_patience) {
      next_rho = rho * cfg.rho_factor;
      positive_slack_streak = 0;
    }

    if (dir.stationarity <= nu) {
      eps = std::max(eps * cfg.eps_factor, cfg.eps_min);
      nu = std::max(nu * cfg.nu_factor, cfg.stationarity_tol);
    } else {
      const Vector& d = dir.direction.d;
      const double phi0 = penalty_value(rho, *cur);
      auto trial = [&](double t) -> std::optional<LineTrial<PointEvaluation>> {
        std::optional<PointEvaluation> e = detail::try_evaluate(problem, cur->x + t * d);
        if (!e) return std::nullopt;
        LineTrial<PointEvaluation> lt;
        lt.phi = penalty_value(rho, *e);
        lt.payload = std::move(*e);
        return lt;
      };
      LineSearchResult<PointEvaluation> ls =
          backtracking_search<PointEvaluation>(phi0, dir.stationarity * dir.stationarity, trial, cfg.backtracking);
      if (ls.status != LineSearchStatus::Success) {
        if (eps_floor) {
          h.termination = Termination::LineSearchFailure;
          break;
        }
        eps = std::max(eps * cfg.eps_factor, cfg.eps_min);
      } else {
        PointEvaluation next = std::move(ls.trial.payload);
        const Vector s = next.x - cur->x;
        const Vector& lam = dir.direction.constraint_multipliers;
        const Vector y = detail::lagrangian_gradient(next, rho, lam) - detail::lagrangian_gradient(*cur, rho, lam);
        if (s.norm() > 0.0) bfgs_update(H, s, y, cfg.bfgs);
        cur = std::move(next);
      }
    }
    rho = next_rho;
    h.iterates.push_back(make_record(k + 1, *cur, rho, clock.stamp(k + 1), 0.0));
  }
  clock.finalize(h);
  return h;
}

}  // namespace nsopt
