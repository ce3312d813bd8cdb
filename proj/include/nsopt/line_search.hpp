#pragma once

// Line searches on a merit function along a fixed direction.

#include "nsopt/core.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace nsopt {

/// Merit value and directional derivative at one trial step, plus whatever the
/// caller wants to keep from that evaluation.
template <class Payload>
struct LineTrial {
  double phi = kInf;
  double dphi = 0.0;
  Payload payload{};
};

enum class LineSearchStatus { Success, ArmijoOnly, Failure };

template <class Payload>
struct LineSearchResult {
  LineSearchStatus status = LineSearchStatus::Failure;
  double t = 0.0;
  LineTrial<Payload> trial;
  int evaluations = 0;
};

struct WolfeOptions {
  double c1 = 1e-4;
  double c2 = 0.5;
  int max_bisections = 50;

  void validate() const {
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw std::invalid_argument("need 0 < c1 < c2 < 1");
    if (max_bisections < 1) throw std::invalid_argument("max_bisections must be >= 1");
  }
};

/// Weak Armijo-Wolfe bracketing/bisection. `eval(t)` returns a LineTrial or
/// nullopt when the point cannot be evaluated (treated as phi = +inf).
template <class Payload, class Eval>
LineSearchResult<Payload> armijo_wolfe_search(double phi0, double dphi0, Eval&& eval, const WolfeOptions& opt = {}) {
  opt.validate();
  if (!(dphi0 < 0.0)) throw std::invalid_argument("line search direction is not a descent direction");
  LineSearchResult<Payload> out;
  double lo = 0.0, hi = kInf, t = 1.0;
  std::optional<LineTrial<Payload>> best_lo;
  for (int i = 0; i <= opt.max_bisections; ++i) {
    std::optional<LineTrial<Payload>> trial = eval(t);
    ++out.evaluations;
    const bool finite = trial && std::isfinite(trial->phi);
    if (!finite || trial->phi > phi0 + opt.c1 * t * dphi0 || (t > 0.0 && trial->phi >= phi0)) {
      hi = t;
    } else if (trial->dphi < opt.c2 * dphi0) {
      lo = t;
      best_lo = std::move(trial);
    } else {
      out.status = LineSearchStatus::Success;
      out.t = t;
      out.trial = std::move(*trial);
      return out;
    }
    t = std::isinf(hi) ? 2.0 * lo : 0.5 * (lo + hi);
  }
  if (best_lo) {
    out.status = LineSearchStatus::ArmijoOnly;
    out.t = lo;
    out.trial = std::move(*best_lo);
  }
  return out;
}

struct BacktrackingOptions {
  double c1 = 1e-4;
  double factor = 0.5;
  int max_steps = 50;
};

/// Backtracking on phi(t) <= phi0 - c1 t decrease_rate, from t = 1.
template <class Payload, class Eval>
LineSearchResult<Payload> backtracking_search(double phi0, double decrease_rate, Eval&& eval,
                                              const BacktrackingOptions& opt = {}) {
  if (!(decrease_rate > 0.0)) throw std::invalid_argument("backtracking needs a positive model decrease");
  LineSearchResult<Payload> out;
  double t = 1.0;
  for (int i = 0; i < opt.max_steps; ++i, t *= opt.factor) {
    std::optional<LineTrial<Payload>> trial = eval(t);
    ++out.evaluations;
    if (trial && std::isfinite(trial->phi) && trial->phi <= phi0 - opt.c1 * t * decrease_rate) {
      out.status = LineSearchStatus::Success;
      out.t = t;
      out.trial = std::move(*trial);
      return out;
    }
  }
  return out;
}

}  // namespace nsopt
