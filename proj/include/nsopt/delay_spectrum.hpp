#pragma once

// Rightmost zeros of the distributed-delay shaper
//
//   f(s) = s * D(s) = gamma * s + sum_k x_k exp(-s tau_k),
//
// the zeros spectral abscissa alpha_D(x) = max Re over the zeros, and its
// gradient with respect to the delay gains x.
//
// Candidates come from a Chebyshev collocation of the infinitesimal generator of
// the associated retarded system y'(t) = -(1/gamma) sum_k x_k y(t - tau_k).
// Each candidate is Newton-refined on f. Completeness is certified with an
// argument-principle count over [r_min, r_max] x [-omega_max, omega_max]. Every
// boundary segment is accepted only when a Lipschitz bound on f rules out a
// winding of f around zero inside it. A second count over the strip above the
// rectangle proves that no root outside it lies to the right of the computed
// abscissa.

#include "nsopt/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

namespace nsopt {

using Complex = std::complex<double>;

class SpectrumError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Shaper constants: gain gamma and delays tau_1 < ... < tau_n.
struct ShaperSpec {
  double gamma = 0.01;
  std::vector<double> delays;

  /// n equally spaced delays on [0, T]: tau_1 = 0, tau_n = T.
  static ShaperSpec equally_spaced(int n, double T, double gamma) {
    if (n < 2) throw std::invalid_argument("shaper needs at least two delays");
    if (!(T > 0.0)) throw std::invalid_argument("longest delay T must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("gain gamma must be positive");
    ShaperSpec s;
    s.gamma = gamma;
    s.delays.resize(n);
    for (int k = 0; k < n; ++k) s.delays[k] = T * k / (n - 1);
    s.delays.back() = T;
    return s;
  }

  /// Arbitrary non-negative, strictly increasing delays. Used for analytic
  /// special cases such as a single delay.
  static ShaperSpec with_delays(std::vector<double> delays, double gamma) {
    if (delays.empty()) throw std::invalid_argument("at least one delay required");
    if (!(gamma > 0.0)) throw std::invalid_argument("gain gamma must be positive");
    if (delays.front() < 0.0) throw std::invalid_argument("delays must be non-negative");
    for (std::size_t k = 1; k < delays.size(); ++k)
      if (!(delays[k] > delays[k - 1])) throw std::invalid_argument("delays must be strictly increasing");
    ShaperSpec s;
    s.gamma = gamma;
    s.delays = std::move(delays);
    return s;
  }

  int size() const { return static_cast<int>(delays.size()); }
  double max_delay() const { return delays.empty() ? 0.0 : delays.back(); }
};

/// Evaluates f(s) = gamma s + sum x_k e^{-s tau_k} and its derivative.
class QuasiPolynomial {
 public:
  QuasiPolynomial(const ShaperSpec& spec, const Vector& x)
      : gamma_(spec.gamma), tau_(spec.delays), x_(x) {
    if (x.size() != spec.size()) throw std::invalid_argument("gain vector does not match delay count");
    l1_ = x_.cwiseAbs().sum();
    const int n = spec.size();
    if (n >= 2 && tau_[0] == 0.0) {
      step_ = tau_[1];
      uniform_ = step_ > 0.0;
      for (int k = 2; k < n && uniform_; ++k)
        uniform_ = std::abs(tau_[k] - k * step_) <= 1e-12 * tau_.back();
    }
  }

  double gamma() const { return gamma_; }
  const Vector& gains() const { return x_; }
  const std::vector<double>& delays() const { return tau_; }
  double gains_l1() const { return l1_; }

  /// e^{-s tau_k} for all k.
  void exponentials(Complex s, Eigen::VectorXcd& out) const {
    const int n = static_cast<int>(tau_.size());
    out.resize(n);
    if (uniform_) {
      const Complex z = std::exp(-s * step_);
      Complex p(1.0, 0.0);
      for (int k = 0; k < n; ++k) {
        out[k] = p;
        p *= z;
      }
      out[n - 1] = std::exp(-s * tau_[n - 1]);
    } else {
      for (int k = 0; k < n; ++k) out[k] = std::exp(-s * tau_[k]);
    }
  }

  Complex value(Complex s) const { return evaluate(s).first; }

  /// f(s) and f'(s) = gamma - sum tau_k x_k e^{-s tau_k}.
  std::pair<Complex, Complex> value_and_derivative(Complex s) const { return evaluate(s); }

  /// Residual scale used for root acceptance.
  double scale(Complex s) const { return gamma_ * std::max(1.0, std::abs(s)) + l1_; }

  /// Upper bound of |f'| on the half plane Re s >= re.
  double lipschitz(double re) const {
    double L = gamma_;
    for (std::size_t k = 0; k < tau_.size(); ++k) L += std::abs(x_[k]) * tau_[k] * std::exp(-re * tau_[k]);
    return L;
  }

  /// Every zero with Re s >= re satisfies |s| <= magnitude_bound(re).
  double magnitude_bound(double re) const {
    double b = 0.0;
    for (std::size_t k = 0; k < tau_.size(); ++k) b += std::abs(x_[k]) * std::exp(-re * tau_[k]);
    return b / gamma_;
  }

 private:
  std::pair<Complex, Complex> evaluate(Complex s) const {
    const int n = static_cast<int>(tau_.size());
    Complex v = gamma_ * s;
    Complex d = gamma_;
    if (uniform_) {
      const Complex z = std::exp(-s * step_);
      Complex p(1.0, 0.0);
      for (int k = 0; k < n - 1; ++k) {
        v += x_[k] * p;
        d -= tau_[k] * x_[k] * p;
        p *= z;
      }
      const Complex last = std::exp(-s * tau_[n - 1]);
      v += x_[n - 1] * last;
      d -= tau_[n - 1] * x_[n - 1] * last;
    } else {
      for (int k = 0; k < n; ++k) {
        const Complex e = std::exp(-s * tau_[k]);
        v += x_[k] * e;
        d -= tau_[k] * x_[k] * e;
      }
    }
    return {v, d};
  }

  double gamma_;
  std::vector<double> tau_;
  Vector x_;
  double l1_ = 0.0;
  double step_ = 0.0;
  bool uniform_ = false;
};

struct SpectrumOptions {
  double r_min = -10.0;
  double omega_max = 0.0;  // <= 0 selects 40 pi / T
  int cheb_order = 40;
  int max_cheb_order = 160;
  double residual_factor = 1e-12;
  double origin_tol = 1e-8;
  double tie_tol = 1e-8;
  double deriv_tol = 1e-8;
  double gradient_denominator_tol = 1e-14;
  int newton_max_steps = 50;
  bool certify = true;
};

struct SpectrumResult {
  std::vector<Complex> roots;  // closed under conjugation, repeated by multiplicity
  std::vector<double> residuals;
  double abscissa = -kInf;
  Complex rightmost{-kInf, 0.0};
  bool origin_root_removed = false;
  int cheb_order_used = 0;
  int certified_count = -1;  // zeros counted by the argument principle (before origin removal)
  double rect_re_min = 0.0, rect_re_max = 0.0, rect_omega = 0.0;

  bool empty() const { return roots.empty(); }
};

namespace detail {

/// Collocation matrix of the generator on N+1 Chebyshev nodes of [-T, 0].
inline Matrix chebyshev_generator(const ShaperSpec& spec, const Vector& x, int N) {
  const double T = spec.max_delay();
  const double pi = std::numbers::pi;
  Vector s(N + 1), theta(N + 1), w(N + 1);
  for (int j = 0; j <= N; ++j) {
    s[j] = std::cos(pi * j / N);
    theta[j] = 0.5 * T * (s[j] - 1.0);
    w[j] = ((j % 2) ? -1.0 : 1.0) * ((j == 0 || j == N) ? 0.5 : 1.0);
  }
  theta[0] = 0.0;
  theta[N] = -T;

  // Trefethen's differentiation matrix in s, rescaled to theta.
  Matrix D = Matrix::Zero(N + 1, N + 1);
  for (int i = 0; i <= N; ++i) {
    const double ci = (i == 0 || i == N) ? 2.0 : 1.0;
    for (int j = 0; j <= N; ++j) {
      if (i == j) continue;
      const double cj = (j == 0 || j == N) ? 2.0 : 1.0;
      D(i, j) = (ci / cj) * (((i + j) % 2) ? -1.0 : 1.0) / (s[i] - s[j]);
    }
    D(i, i) = -D.row(i).sum();
  }
  D *= 2.0 / T;

  Matrix A(N + 1, N + 1);
  A.bottomRows(N) = D.bottomRows(N);
  A.row(0).setZero();
  for (int k = 0; k < spec.size(); ++k) {
    const double a_k = -x[k] / spec.gamma;
    if (a_k == 0.0) continue;
    const double t = -spec.delays[k];
    // barycentric Lagrange basis at t
    int hit = -1;
    for (int j = 0; j <= N; ++j)
      if (std::abs(t - theta[j]) <= 1e-14 * T) hit = j;
    if (hit >= 0) {
      A(0, hit) += a_k;
      continue;
    }
    double denom = 0.0;
    Vector l(N + 1);
    for (int j = 0; j <= N; ++j) {
      l[j] = w[j] / (t - theta[j]);
      denom += l[j];
    }
    A.row(0) += (a_k / denom) * l.transpose();
  }
  return A;
}

/// Newton on f; nullopt when the iteration does not converge or runs away.
inline std::optional<Complex> newton_refine(const QuasiPolynomial& q, Complex s, int max_steps,
                                            double residual_factor, double re_floor) {
  Complex prev_step(kInf, 0.0);
  for (int it = 0; it < max_steps; ++it) {
    auto [f, df] = q.value_and_derivative(s);
    if (!(std::abs(df) > 0.0) || !std::isfinite(std::abs(f))) return std::nullopt;
    Complex step = f / df;
    const bool small = std::abs(f) <= residual_factor * q.scale(s);
    if (small && std::abs(step) >= std::abs(prev_step)) break;  // stalled at rounding level
    s -= step;
    prev_step = step;
    if (s.real() < re_floor || std::abs(s) > 1e9 || !std::isfinite(s.real()) || !std::isfinite(s.imag()))
      return std::nullopt;
    if (small && std::abs(step) <= 1e-15 * (1.0 + std::abs(s))) break;
  }
  if (std::abs(q.value(s)) <= residual_factor * q.scale(s)) return s;
  return std::nullopt;
}

/// Newton on f(s) / prod (s - known_i).
inline std::optional<Complex> deflated_newton(const QuasiPolynomial& q, Complex s,
                                              const std::vector<Complex>& known, int max_steps,
                                              double residual_factor, double re_floor) {
  for (int it = 0; it < max_steps; ++it) {
    auto [f, df] = q.value_and_derivative(s);
    if (f == Complex(0.0, 0.0)) break;
    Complex ratio = df / f;
    for (const Complex& r : known) {
      Complex d = s - r;
      if (d == Complex(0.0, 0.0)) return std::nullopt;
      ratio -= 1.0 / d;
    }
    if (ratio == Complex(0.0, 0.0)) return std::nullopt;
    Complex step = 1.0 / ratio;
    s -= step;
    if (s.real() < re_floor || std::abs(s) > 1e9 || !std::isfinite(s.real()) || !std::isfinite(s.imag()))
      return std::nullopt;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(s))) break;
  }
  // polish without deflation so the residual criterion is the ordinary one
  return newton_refine(q, s, max_steps, residual_factor, re_floor);
}

/// Winding number of f around the boundary of [re_lo, re_hi] x [im_lo, im_hi].
/// nullopt when a zero lies too close to the boundary to certify the count.
inline std::optional<int> count_zeros(const QuasiPolynomial& q, double re_lo, double re_hi, double im_lo,
                                      double im_hi, long max_evaluations = 4'000'000) {
  const Complex corners[5] = {{re_lo, im_lo}, {re_hi, im_lo}, {re_hi, im_hi}, {re_lo, im_hi}, {re_lo, im_lo}};
  long evaluations = 0;
  double total = 0.0;

  struct Piece {
    Complex a, b, fa, fb;
    int depth;
  };
  std::vector<Piece> stack;
  for (int e = 0; e < 4; ++e) {
    const Complex a = corners[e], b = corners[e + 1];
    const int pieces = 8;  // bisection below refines where the Lipschitz test demands
    Complex prev = a;
    Complex fprev = q.value(a);
    ++evaluations;
    for (int i = 1; i <= pieces; ++i) {
      Complex next = (i == pieces) ? b : a + (b - a) * (static_cast<double>(i) / pieces);
      Complex fnext = q.value(next);
      ++evaluations;
      stack.push_back({prev, next, fprev, fnext, 0});
      while (!stack.empty()) {
        Piece p = stack.back();
        stack.pop_back();
        const double fa = std::abs(p.fa), fb = std::abs(p.fb);
        if (fa == 0.0 || fb == 0.0) return std::nullopt;
        const double L = q.lipschitz(std::min(p.a.real(), p.b.real()));
        if (L * std::abs(p.b - p.a) < 0.95 * std::max(fa, fb)) {
          total += std::arg(p.fb / p.fa);
          continue;
        }
        if (p.depth > 60 || evaluations > max_evaluations) return std::nullopt;
        Complex m = 0.5 * (p.a + p.b);
        Complex fm = q.value(m);
        ++evaluations;
        // process the first half before the second so that arg accumulates in order
        stack.push_back({m, p.b, fm, p.fb, p.depth + 1});
        stack.push_back({p.a, m, p.fa, fm, p.depth + 1});
      }
      prev = next;
      fprev = fnext;
    }
  }
  const double winding = total / (2.0 * std::numbers::pi);
  const double rounded = std::round(winding);
  if (std::abs(winding - rounded) > 0.05) return std::nullopt;
  return static_cast<int>(rounded);
}

/// Newton seeds on the root chains of each single-delay term gamma s + x_k e^{-s tau_k},
/// from the asymptotic form of the Lambert W branches.
inline std::vector<Complex> chain_seeds(const QuasiPolynomial& q, double omega_lo, double omega_hi) {
  std::vector<Complex> seeds;
  const auto& tau = q.delays();
  const Vector& x = q.gains();
  const double pi = std::numbers::pi;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    if (tau[k] <= 0.0 || x[k] == 0.0) continue;
    const Complex a(-x[k] * tau[k] / q.gamma(), 0.0);  // w e^w = a, s = w / tau
    const int j_lo = std::max(0, static_cast<int>(std::floor(omega_lo * tau[k] / (2.0 * pi))) - 1);
    const int j_hi = static_cast<int>(std::ceil(omega_hi * tau[k] / (2.0 * pi))) + 1;
    for (int j = j_lo; j <= j_hi; ++j) {
      Complex L1 = std::log(a) + Complex(0.0, 2.0 * pi * j);
      Complex w = (std::abs(L1) > 1.0) ? L1 - std::log(L1) : L1;
      seeds.push_back(w / tau[k]);
    }
  }
  return seeds;
}

inline bool in_rect(Complex s, double re_lo, double re_hi, double om) {
  return s.real() >= re_lo && s.real() <= re_hi && std::abs(s.imag()) <= om;
}

/// Adds r (normalised to Im >= 0) unless it duplicates a stored root.
inline void add_upper(std::vector<Complex>& upper, Complex r, const QuasiPolynomial& q, double re_floor,
                      int max_steps, double residual_factor) {
  if (r.imag() < 0.0) r = std::conj(r);
  if (std::abs(r.imag()) <= 1e-9 * (1.0 + std::abs(r))) {
    // snap to the real axis and refine in real arithmetic
    double t = r.real();
    for (int it = 0; it < max_steps; ++it) {
      auto [f, df] = q.value_and_derivative(Complex(t, 0.0));
      if (df.real() == 0.0) break;
      double step = f.real() / df.real();
      t -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(t))) break;
    }
    if (std::abs(q.value(Complex(t, 0.0))) <= residual_factor * q.scale(Complex(t, 0.0)) && t >= re_floor)
      r = Complex(t, 0.0);
    else
      r = Complex(r.real(), 0.0);
  }
  for (const Complex& u : upper)
    if (std::abs(u - r) <= 1e-8 * (1.0 + std::abs(r))) return;
  upper.push_back(r);
}

inline int full_count(const std::vector<Complex>& upper, double re_lo, double re_hi, double om) {
  int c = 0;
  for (const Complex& u : upper)
    if (in_rect(u, re_lo, re_hi, om)) c += (u.imag() > 0.0) ? 2 : 1;
  return c;
}

}  // namespace detail

/// All zeros of gamma s + sum x_k e^{-s tau_k} in the certified rectangle, with the
/// artificial zero at the origin removed, plus any zero outside it lying right of
/// the abscissa.
inline SpectrumResult rightmost_roots(const ShaperSpec& spec, const Vector& x,
                                      const SpectrumOptions& opts = {}) {
  if (x.size() != spec.size()) throw std::invalid_argument("gain vector does not match delay count");
  if (!std::isfinite(opts.r_min)) throw std::invalid_argument("r_min must be finite");
  for (int k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k])) throw SpectrumError("non-finite delay gain");

  SpectrumResult res;
  const QuasiPolynomial q(spec, x);
  if (q.gains_l1() == 0.0) return res;  // D(s) = gamma has no zeros

  const double T = spec.max_delay();
  const double re_floor = opts.r_min - 50.0;
  std::vector<Complex> upper;  // roots with Im >= 0, each once per multiplicity

  if (T == 0.0) {
    // no delay: gamma s + sum x = 0
    upper.push_back(Complex(-x.sum() / spec.gamma, 0.0));
    res.certified_count = 1;
    res.rect_re_min = opts.r_min;
    res.rect_re_max = kInf;
    res.rect_omega = kInf;
  } else {
    const double omega = opts.omega_max > 0.0 ? opts.omega_max : 40.0 * std::numbers::pi / T;
    // zeros with Re >= 0 satisfy |s| <= magnitude_bound(0); doubling keeps |f| away from 0 on the right edge
    const double re_hi = 2.0 * q.magnitude_bound(0.0) + 1.0;
    double re_lo = opts.r_min;
    double om = omega;

    std::optional<int> count;
    if (opts.certify) {
      for (int attempt = 0; attempt < 6 && !count; ++attempt) {
        if (attempt > 0) {
          // a zero sits on the boundary; move the left and top edges slightly outward
          const double shift = 1e-3 * attempt * attempt;
          re_lo = opts.r_min - shift * (1.0 + std::abs(opts.r_min));
          om = omega * (1.0 + shift);
        }
        count = detail::count_zeros(q, re_lo, re_hi, -om, om);
      }
      if (!count) throw SpectrumError("argument-principle count failed: zero on the search boundary");
      res.certified_count = *count;
    }

    std::vector<Complex> candidates;
    int order = std::max(4, opts.cheb_order);
    auto harvest = [&](int N) {
      Eigen::EigenSolver<Matrix> es(detail::chebyshev_generator(spec, x, N), false);
      if (es.info() != Eigen::Success) throw SpectrumError("eigenvalue computation failed");
      const Eigen::VectorXcd ev = es.eigenvalues();
      for (int i = 0; i < ev.size(); ++i) {
        if (ev[i].imag() < -1e-12 * (1.0 + std::abs(ev[i]))) continue;  // conjugates handled by symmetry
        candidates.push_back(ev[i]);
        auto r = detail::newton_refine(q, ev[i], opts.newton_max_steps, opts.residual_factor, re_floor);
        if (r) detail::add_upper(upper, *r, q, re_floor, opts.newton_max_steps, opts.residual_factor);
      }
    };
    harvest(order);
    res.cheb_order_used = order;

    if (opts.certify) {
      auto found = [&] { return detail::full_count(upper, re_lo, re_hi, om); };
      if (found() < *count) {
        // high-frequency zeros sit on the chains of the single-delay terms
        for (const Complex& s : detail::chain_seeds(q, 0.0, om)) {
          auto r = detail::newton_refine(q, s, opts.newton_max_steps, opts.residual_factor, re_floor);
          if (r) detail::add_upper(upper, *r, q, re_floor, opts.newton_max_steps, opts.residual_factor);
        }
      }
      while (found() < *count && order < opts.max_cheb_order) {
        order = std::min(2 * order, opts.max_cheb_order);
        harvest(order);
        res.cheb_order_used = order;
      }
      if (found() < *count) {
        // clustered or multiple zeros: deflate the known ones and search again
        for (int pass = 0; pass < 3 && found() < *count; ++pass) {
          for (const Complex& c : candidates) {
            if (found() >= *count) break;
            std::vector<Complex> known;
            for (const Complex& u : upper) {
              known.push_back(u);
              if (u.imag() > 0.0) known.push_back(std::conj(u));
            }
            auto r = detail::deflated_newton(q, c, known, opts.newton_max_steps, opts.residual_factor, re_floor);
            if (!r) continue;
            Complex ru = r->imag() < 0.0 ? std::conj(*r) : *r;
            if (std::abs(ru.imag()) <= 1e-9 * (1.0 + std::abs(ru))) ru = Complex(ru.real(), 0.0);
            if (detail::in_rect(ru, re_lo, re_hi, om)) upper.push_back(ru);  // may repeat: multiplicity
          }
        }
      }
      if (found() != *count)
        throw SpectrumError("zero count mismatch: argument principle " + std::to_string(*count) +
                            ", located " + std::to_string(found()));
    }

    // keep the rectangle contents
    std::vector<Complex> kept;
    for (const Complex& u : upper)
      if (detail::in_rect(u, re_lo, re_hi, om)) kept.push_back(u);
    upper.swap(kept);
    res.rect_re_min = re_lo;
    res.rect_re_max = re_hi;
    res.rect_omega = om;

    if (opts.certify && !upper.empty()) {
      // nothing above the rectangle may lie right of the abscissa found so far
      double a = -kInf;
      for (const Complex& u : upper) a = std::max(a, u.real());
      {
        const double left = a + 1e-9 * (1.0 + std::abs(a));
        const double top = q.magnitude_bound(left);
        if (top > om) {
          std::optional<int> strip;
          double lift = 0.0;
          for (int attempt = 0; attempt < 4 && !strip; ++attempt) {
            lift = attempt * 1e-4 * om;
            strip = detail::count_zeros(q, left, std::max(left + 1.0, std::min(re_hi, top + 1.0)), om + lift,
                                        top + 1.0);
          }
          if (!strip) throw SpectrumError("argument-principle count above the rectangle failed");
          if (*strip > 0) {
            std::vector<Complex> extra;
            for (const Complex& s : detail::chain_seeds(q, om, top + 1.0)) {
              auto r = detail::newton_refine(q, s, opts.newton_max_steps, opts.residual_factor, re_floor);
              if (!r) continue;
              Complex ru = r->imag() < 0.0 ? std::conj(*r) : *r;
              if (ru.real() >= left && ru.imag() >= om + lift) {
                bool dup = false;
                for (const Complex& e : extra) dup = dup || std::abs(e - ru) <= 1e-8 * (1.0 + std::abs(ru));
                if (!dup) extra.push_back(ru);
              }
            }
            if (static_cast<int>(extra.size()) != *strip)
              throw SpectrumError("zeros right of the abscissa above the search rectangle not located");
            upper.insert(upper.end(), extra.begin(), extra.end());
          }
        }
      }
    }
  }

  // the artificial zero of s * D(s) at the origin (a simple real zero)
  {
    int nearest = -1;
    for (int i = 0; i < static_cast<int>(upper.size()); ++i)
      if (upper[i].imag() == 0.0 && std::abs(upper[i]) <= opts.origin_tol &&
          (nearest < 0 || std::abs(upper[i]) < std::abs(upper[nearest])))
        nearest = i;
    if (nearest >= 0) {
      upper.erase(upper.begin() + nearest);
      res.origin_root_removed = true;
    }
  }

  std::sort(upper.begin(), upper.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  for (const Complex& u : upper) {
    if (u.real() < opts.r_min) continue;
    res.roots.push_back(u);
    if (u.imag() > 0.0) res.roots.push_back(std::conj(u));
  }
  for (const Complex& r : res.roots) res.residuals.push_back(std::abs(q.value(r)));
  if (!res.roots.empty()) {
    res.rightmost = res.roots.front();
    res.abscissa = res.rightmost.real();
  }
  return res;
}

struct SpectralAbscissa {
  double value = -kInf;
  Vector gradient;
  Complex root{-kInf, 0.0};
  bool multiplicity_warning = false;
};

/// alpha_D(x) and its gradient at the rightmost zero lambda_1:
///   grad = -Re( e^{-lambda_1 tau} / (gamma - sum tau_k x_k e^{-lambda_1 tau_k}) ).
inline SpectralAbscissa spectral_abscissa_and_gradient(const ShaperSpec& spec, const Vector& x,
                                                       const SpectrumOptions& opts = {}) {
  SpectrumResult sr = rightmost_roots(spec, x, opts);
  SpectralAbscissa out;
  out.gradient = Vector::Zero(spec.size());
  if (sr.empty()) return out;
  out.value = sr.abscissa;
  out.root = sr.rightmost;

  const QuasiPolynomial q(spec, x);
  Eigen::VectorXcd e;
  q.exponentials(out.root, e);
  Complex denom = spec.gamma;
  for (int k = 0; k < spec.size(); ++k) denom -= spec.delays[k] * x[k] * e[k];
  if (std::abs(denom) < opts.gradient_denominator_tol)
    throw SpectrumError("spectral abscissa gradient unavailable: rightmost zero is defective");
  for (int k = 0; k < spec.size(); ++k) out.gradient[k] = -(e[k] / denom).real();

  if (std::abs(denom) < opts.deriv_tol) out.multiplicity_warning = true;
  int near_top = 0;
  for (const Complex& r : sr.roots)
    if (r.imag() >= 0.0 && out.value - r.real() <= opts.tie_tol) ++near_top;
  if (near_top > 1) out.multiplicity_warning = true;
  return out;
}

/// alpha_D(x) - alpha_c with gradient. An empty spectrum maps to the constant -1e6.
inline FunctionValue stability_constraint(const ShaperSpec& spec, const Vector& x, double alpha_c,
                                          const SpectrumOptions& opts = {}) {
  if (alpha_c > 0.0) throw std::invalid_argument("stability level alpha_c must be <= 0");
  SpectralAbscissa sa = spectral_abscissa_and_gradient(spec, x, opts);
  FunctionValue v;
  if (!std::isfinite(sa.value)) {
    v.value = -1e6;
    v.gradient = Vector::Zero(spec.size());
    return v;
  }
  v.value = sa.value - alpha_c;
  v.gradient = std::move(sa.gradient);
  return v;
}

}  // namespace nsopt
