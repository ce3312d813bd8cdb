#pragma once

// Constrained problem abstraction, l1 penalty / violation, feasibility tests and
// run-history records shared by both solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nsopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown by a problem function that cannot produce a value or gradient at x.
/// Solvers treat it as an evaluation failure at that point, not as a bug.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FunctionValue {
  double value = 0.0;
  Vector gradient;
};

/// One scalar function of the problem with its gradient. `nonsmooth` marks the
/// functions that receive gradient sampling.
struct ScalarFunction {
  std::string name;
  std::function<FunctionValue(const Vector&)> evaluate;
  bool nonsmooth = false;
};

/// Everything known about the problem at one point.
struct PointEvaluation {
  Vector x;
  double f = 0.0;
  Vector grad_f;
  Vector c_ineq;
  Matrix jac_ineq;  // rows = inequality constraints
  Vector c_eq;
  Matrix jac_eq;  // rows = equality constraints
};

/// min f(x) s.t. c_I(x) <= 0, c_E(x) = 0. Functions must be deterministic and
/// free of shared mutable state; several runs may evaluate them concurrently.
struct Problem {
  int dimension = 0;
  ScalarFunction objective;
  std::vector<ScalarFunction> inequalities;
  std::vector<ScalarFunction> equalities;

  int num_inequalities() const { return static_cast<int>(inequalities.size()); }
  int num_equalities() const { return static_cast<int>(equalities.size()); }

  void validate() const {
    if (dimension <= 0) throw std::invalid_argument("problem dimension must be positive");
    if (!objective.evaluate) throw std::invalid_argument("problem has no objective evaluator");
    for (const auto& c : inequalities)
      if (!c.evaluate) throw std::invalid_argument("inequality '" + c.name + "' has no evaluator");
    for (const auto& c : equalities)
      if (!c.evaluate) throw std::invalid_argument("equality '" + c.name + "' has no evaluator");
  }

  /// Evaluates one function and checks the gradient dimension.
  FunctionValue evaluate_function(const ScalarFunction& fn, const Vector& x) const {
    FunctionValue v = fn.evaluate(x);
    if (v.gradient.size() != dimension)
      throw std::logic_error("gradient of '" + fn.name + "' has wrong dimension");
    return v;
  }

  PointEvaluation evaluate(const Vector& x) const {
    if (x.size() != dimension) throw std::invalid_argument("point has wrong dimension");
    PointEvaluation e;
    e.x = x;
    FunctionValue fv = evaluate_function(objective, x);
    e.f = fv.value;
    e.grad_f = std::move(fv.gradient);
    e.c_ineq.resize(num_inequalities());
    e.jac_ineq.resize(num_inequalities(), dimension);
    for (int j = 0; j < num_inequalities(); ++j) {
      FunctionValue cv = evaluate_function(inequalities[j], x);
      e.c_ineq[j] = cv.value;
      e.jac_ineq.row(j) = cv.gradient.transpose();
    }
    e.c_eq.resize(num_equalities());
    e.jac_eq.resize(num_equalities(), dimension);
    for (int j = 0; j < num_equalities(); ++j) {
      FunctionValue cv = evaluate_function(equalities[j], x);
      e.c_eq[j] = cv.value;
      e.jac_eq.row(j) = cv.gradient.transpose();
    }
    return e;
  }
};

/// ineq_tol: inequalities must satisfy max c_I < ineq_tol (strict).
/// eq_viol_tol: bound on the total equality violation sum |c_E|.
struct FeasibilityTolerances {
  double ineq_tol = 0.0;
  double eq_viol_tol = 1e-8;

  void validate() const {
    if (!(eq_viol_tol >= 0.0)) throw std::invalid_argument("eq_viol_tol must be >= 0");
  }
};

inline double inequality_violation(const Vector& c_ineq) {
  return c_ineq.size() == 0 ? 0.0 : c_ineq.cwiseMax(0.0).sum();
}

inline double equality_violation(const Vector& c_eq) {
  return c_eq.size() == 0 ? 0.0 : c_eq.cwiseAbs().sum();
}

/// v(x) = sum max(c_I, 0) + sum |c_E|.
inline double violation(const Vector& c_ineq, const Vector& c_eq) {
  return inequality_violation(c_ineq) + equality_violation(c_eq);
}

/// phi(x; rho) = rho f + v.
inline double penalty(double rho, double f, double v) {
  if (!(rho > 0.0)) throw std::invalid_argument("penalty parameter must be positive");
  return rho * f + v;
}

inline bool is_feasible(const Vector& c_ineq, const Vector& c_eq, const FeasibilityTolerances& tol) {
  if (c_ineq.size() > 0 && !(c_ineq.maxCoeff() < tol.ineq_tol)) return false;
  return equality_violation(c_eq) <= tol.eq_viol_tol;
}

/// A.e. gradient of phi(.; rho): rho grad f + sum over violated inequalities of
/// grad c_j + sum over equalities of sign(c_j) grad c_j, with sign(0) = 0.
inline Vector penalty_gradient(double rho, const PointEvaluation& e) {
  Vector g = rho * e.grad_f;
  for (int j = 0; j < e.c_ineq.size(); ++j)
    if (e.c_ineq[j] > 0.0) g += e.jac_ineq.row(j).transpose();
  for (int j = 0; j < e.c_eq.size(); ++j) {
    if (e.c_eq[j] > 0.0)
      g += e.jac_eq.row(j).transpose();
    else if (e.c_eq[j] < 0.0)
      g -= e.jac_eq.row(j).transpose();
  }
  return g;
}

/// phi evaluated without the rho > 0 restriction (rho = 0 is the pure violation).
inline double penalty_value(double rho, const PointEvaluation& e) {
  return rho * e.f + violation(e.c_ineq, e.c_eq);
}

enum class Termination {
  Stationarity,
  MaxIterations,
  LineSearchFailure,
  SubproblemFailure,
  EvaluationFailure,
};

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Stationarity: return "stationarity";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailure: return "line_search_failure";
    case Termination::SubproblemFailure: return "subproblem_failure";
    case Termination::EvaluationFailure: return "evaluation_failure";
  }
  return "unknown";
}

inline Termination termination_from_string(std::string_view s) {
  for (Termination t : {Termination::Stationarity, Termination::MaxIterations,
                        Termination::LineSearchFailure, Termination::SubproblemFailure,
                        Termination::EvaluationFailure})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown termination reason '" + std::string(s) + "'");
}

struct IterateRecord {
  int k = 0;
  Vector x;
  double f = 0.0;
  Vector c_ineq;
  Vector c_eq;
  double rho = 1.0;
  double cost = 0.0;  // cumulative, seconds (or units in unit-cost mode)
  double stationarity = 0.0;
};

struct RunHistory {
  std::string start_id;
  std::string solver;
  std::string start_set;
  int start_index = 0;
  std::uint64_t seed = 0;
  std::string instance_hash;
  std::vector<IterateRecord> iterates;
  Termination termination = Termination::MaxIterations;
  int steering_fallbacks = 0;

  int iterations() const { return iterates.empty() ? 0 : static_cast<int>(iterates.size()) - 1; }
  double total_cost() const { return iterates.empty() ? 0.0 : iterates.back().cost; }

  /// Non-empty, indices 0,1,2,..., costs non-decreasing from 0.
  void validate() const {
    if (iterates.empty()) throw std::invalid_argument("run history is empty");
    for (std::size_t i = 0; i < iterates.size(); ++i) {
      if (iterates[i].k != static_cast<int>(i))
        throw std::invalid_argument("iterate indices must increase from 0");
      if (i == 0 && iterates[i].cost != 0.0)
        throw std::invalid_argument("cost at the starting point must be zero");
      if (i > 0 && iterates[i].cost < iterates[i - 1].cost)
        throw std::invalid_argument("cumulative cost must be non-decreasing");
    }
  }
};

/// Smallest feasible objective among iterates obtained within cost_limit.
inline std::optional<double> best_feasible_within(const RunHistory& history, double cost_limit,
                                                  const FeasibilityTolerances& tol) {
  if (!(cost_limit >= 0.0)) throw std::invalid_argument("cost limit must be >= 0");
  std::optional<double> best;
  for (const IterateRecord& r : history.iterates) {
    if (r.cost > cost_limit) break;
    if (!is_feasible(r.c_ineq, r.c_eq, tol)) continue;
    if (!best || r.f < *best) best = r.f;
  }
  return best;
}

/// How per-iterate cumulative cost is recorded.
///  wall:    monotonic clock seconds since run start
///  unit:    one unit per iteration (byte-stable histories)
///  average: wall total spread evenly over iterations after the run
enum class CostMode { Wall, Unit, Average };

inline std::string_view to_string(CostMode m) {
  switch (m) {
    case CostMode::Wall: return "wall";
    case CostMode::Unit: return "unit";
    case CostMode::Average: return "average";
  }
  return "wall";
}

inline CostMode cost_mode_from_string(std::string_view s) {
  if (s == "wall") return CostMode::Wall;
  if (s == "unit") return CostMode::Unit;
  if (s == "average") return CostMode::Average;
  throw std::invalid_argument("unknown cost mode '" + std::string(s) + "'");
}

class CostClock {
 public:
  explicit CostClock(CostMode mode) : mode_(mode), start_(std::chrono::steady_clock::now()) {}

  double stamp(int k) const {
    if (k == 0) return 0.0;
    if (mode_ == CostMode::Unit) return static_cast<double>(k);
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    return dt.count();
  }

  void finalize(RunHistory& h) const {
    if (mode_ != CostMode::Average || h.iterates.size() < 2) return;
    double per_iter = h.iterates.back().cost / static_cast<double>(h.iterations());
    for (auto& r : h.iterates) r.cost = per_iter * r.k;
  }

 private:
  CostMode mode_;
  std::chrono::steady_clock::time_point start_;
};

inline IterateRecord make_record(int k, const PointEvaluation& e, double rho, double cost,
                                 double stationarity) {
  IterateRecord r;
  r.k = k;
  r.x = e.x;
  r.f = e.f;
  r.c_ineq = e.c_ineq;
  r.c_eq = e.c_eq;
  r.rho = rho;
  r.cost = cost;
  r.stationarity = stationarity;
  return r;
}

}  // namespace nsopt
