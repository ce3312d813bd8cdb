#include "nsopt/delay_spectrum.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsopt;
namespace to = testing_oracles;

namespace {

const ShaperSpec kSpec18 = ShaperSpec::equally_spaced(18, 0.8, 0.01);

/// Principal Lambert W by Halley iteration from the branch-point expansion.
Complex lambert_w0(Complex z) {
  const Complex p = std::sqrt(2.0 * (std::exp(1.0) * z + 1.0));
  Complex w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  for (int i = 0; i < 100; ++i) {
    const Complex ew = std::exp(w);
    const Complex f = w * ew - z;
    const Complex step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
    w -= step;
    if (std::abs(step) < 1e-16 * std::abs(w)) break;
  }
  return w;
}

Vector random_gains(std::mt19937_64& rng, int n, bool lc) {
  Vector x(n);
  if (!lc) {
    std::normal_distribution<double> N;
    for (int k = 0; k < n; ++k) x[k] = N(rng);
  } else {
    std::uniform_real_distribution<double> U(0, 1);
    std::vector<double> p(n - 1);
    for (double& v : p) v = U(rng);
    x[0] = p[0];
    for (int k = 1; k < n - 1; ++k) x[k] = p[k] - p[k - 1];
    x[n - 1] = -p[n - 2];
  }
  return x;
}

/// Rightmost real zero and rightmost upper-half-plane zero from the grid oracle.
std::pair<double, Complex> real_and_complex_rightmost(const std::vector<double>& tau, const std::vector<double>& x) {
  const auto roots = to::grid_newton_roots(1.0, tau, x, -4.0, 3.0, 0.0, 12.0, 70);
  double re = -kInf;
  Complex cp(-kInf, 0.0);
  for (const Complex& r : roots) {
    if (std::abs(r.imag()) < 1e-9)
      re = std::max(re, r.real());
    else if (r.real() > cp.real())
      cp = r;
  }
  return {re, cp};
}

}  // namespace

TEST(Spectrum, SingleUndelayedTermHasOneRoot) {
  const ShaperSpec s = ShaperSpec::with_delays({0.0}, 0.01);
  const Vector x = Vector::Constant(1, 0.02);
  const SpectrumResult r = rightmost_roots(s, x);
  ASSERT_EQ(r.roots.size(), 1u);
  EXPECT_NEAR(r.roots[0].real(), -2.0, 1e-12);
  EXPECT_EQ(r.roots[0].imag(), 0.0);
  EXPECT_NEAR(r.abscissa, -2.0, 1e-12);
}

TEST(Spectrum, LambertRootOfSingleDelay) {
  // s + e^{-s} = 0  <=>  s e^{s} = -1, so s = W_0(-1)
  const Complex w = lambert_w0(-1.0);
  ASSERT_LT(std::abs(w * std::exp(w) + 1.0), 1e-14);
  EXPECT_NEAR(w.real(), -0.3181, 5e-5);
  EXPECT_NEAR(w.imag(), 1.3372, 5e-5);

  const ShaperSpec s = ShaperSpec::with_delays({1.0}, 1.0);
  const SpectrumResult r = rightmost_roots(s, Vector::Ones(1));
  ASSERT_GE(r.roots.size(), 2u);
  EXPECT_NEAR(r.abscissa, w.real(), 1e-8);
  EXPECT_NEAR(std::abs(r.rightmost.imag()), w.imag(), 1e-8);
}

TEST(Spectrum, ZeroGainsHaveEmptySpectrum) {
  const SpectrumResult r = rightmost_roots(kSpec18, Vector::Zero(18));
  EXPECT_TRUE(r.empty());
  EXPECT_EQ(r.abscissa, -kInf);
  const FunctionValue c = stability_constraint(kSpec18, Vector::Zero(18), -0.1);
  EXPECT_EQ(c.value, -1e6);
  EXPECT_TRUE(c.gradient.isZero());
}

TEST(Spectrum, GradientOfUndelayedTerm) {
  const ShaperSpec s = ShaperSpec::with_delays({0.0}, 0.01);
  const SpectralAbscissa a = spectral_abscissa_and_gradient(s, Vector::Constant(1, 0.02));
  EXPECT_NEAR(a.gradient[0], -100.0, 1e-9);
  EXPECT_FALSE(a.multiplicity_warning);
}

TEST(Spectrum, UndelayedAbscissaScalesWithGain) {
  const ShaperSpec s = ShaperSpec::with_delays({0.0}, 0.01);
  for (double x : {-0.003, 0.002, 0.011})
    for (double k : {0.5, 2.0, 7.0}) {
      const double a = rightmost_roots(s, Vector::Constant(1, x)).abscissa;
      const double b = rightmost_roots(s, Vector::Constant(1, k * x)).abscissa;
      EXPECT_NEAR(b, k * a, 1e-12 * (1 + std::abs(b)));
    }
}

TEST(Spectrum, StabilityConstraintValues) {
  const ShaperSpec s = ShaperSpec::with_delays({0.0}, 0.01);
  // alpha_D = -2
  EXPECT_NEAR(stability_constraint(s, Vector::Constant(1, 0.02), -0.1).value, -1.9, 1e-12);
  // alpha_D = 0 would need x = 0 (empty spectrum); use a root at -alpha instead
  EXPECT_NEAR(stability_constraint(s, Vector::Constant(1, -0.002), -0.1).value, 0.3, 1e-12);
  EXPECT_THROW(stability_constraint(s, Vector::Constant(1, 0.02), 0.5), std::invalid_argument);
}

TEST(Spectrum, GradientMatchesFiniteDifferencesOnShaperInstance) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int t = 0; checked < 20 && t < 60; ++t) {
    const Vector x = random_gains(rng, 18, t % 2 == 1);
    const SpectralAbscissa a = spectral_abscissa_and_gradient(kSpec18, x);
    if (a.multiplicity_warning) continue;
    auto alpha = [](const Vector& y) { return rightmost_roots(kSpec18, y).abscissa; };
    const Vector fd = to::central_difference(alpha, x, 1e-6);
    const double rel = (fd - a.gradient).norm() / a.gradient.norm();
    EXPECT_LE(rel, 1e-5) << "point " << t << " alpha " << a.value;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(Spectrum, RootsAreAccurateSymmetricAndComplete) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_gains(rng, 18, t % 2 == 1);
    const SpectrumResult r = rightmost_roots(kSpec18, x);
    const QuasiPolynomial q(kSpec18, x);
    ASSERT_FALSE(r.empty());
    for (std::size_t i = 0; i < r.roots.size(); ++i) {
      EXPECT_LE(r.residuals[i], 1e-12 * q.scale(r.roots[i])) << "x#" << t;
      EXPECT_LE(std::abs(q.value(r.roots[i])), 1e-12 * q.scale(r.roots[i]));
      if (r.roots[i].imag() != 0.0) {
        const Complex c = std::conj(r.roots[i]);
        bool paired = false;
        for (const Complex& s : r.roots) paired = paired || std::abs(s - c) <= 1e-10 * (1 + std::abs(c));
        EXPECT_TRUE(paired) << "x#" << t;
      }
      EXPECT_GE(r.roots[i].real(), -10.0);
      EXPECT_LE(r.roots[i].real(), r.abscissa);
    }
    // argument-principle count = retained zeros in the rectangle (+ the removed origin zero)
    if (r.rect_re_min == -10.0) {
      int in_rect = 0;
      for (const Complex& s : r.roots) in_rect += std::abs(s.imag()) <= r.rect_omega;
      EXPECT_EQ(r.certified_count, in_rect + (r.origin_root_removed ? 1 : 0)) << "x#" << t;
    }
    // every zero the grid oracle finds near the right edge is reported
    const std::vector<double> xv(x.data(), x.data() + 18);
    for (const Complex& s : to::grid_newton_roots(0.01, kSpec18.delays, xv, r.abscissa - 2.0, r.abscissa + 1.0,
                                                  0.0, 60.0, 60)) {
      if (std::abs(s) < 1e-8 && r.origin_root_removed) continue;
      bool found = false;
      for (const Complex& u : r.roots) found = found || std::abs(u - s) <= 1e-6 * (1 + std::abs(s));
      EXPECT_TRUE(found) << "x#" << t << " missing zero " << s;
    }
  }
}

TEST(Spectrum, OriginZeroIsRemovedWhenGainsSumToZero) {
  std::mt19937_64 rng(5);
  const Vector x = random_gains(rng, 18, true);
  ASSERT_NEAR(x.sum(), 0.0, 1e-14);
  const SpectrumResult r = rightmost_roots(kSpec18, x);
  EXPECT_TRUE(r.origin_root_removed);
  for (const Complex& s : r.roots) EXPECT_GT(std::abs(s), 1e-8);
}

TEST(Spectrum, TieBetweenRealAndComplexZerosIsFlagged) {
  // f(s) = s + x1 + x2 e^{-s/2} + x3 e^{-s}; along x2 the rightmost real zero and
  // the rightmost complex pair swap order. Bisect the crossing with the grid oracle.
  const std::vector<double> tau{0.0, 0.5, 1.0};
  auto gap = [&](double b) {
    auto [re, cp] = real_and_complex_rightmost(tau, {1.0, b, -4.0});
    return re - cp.real();
  };
  double lo = 2.0, hi = 2.9;
  ASSERT_GT(gap(lo), 0.0);
  ASSERT_LT(gap(hi), 0.0);
  for (int i = 0; i < 60 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  const ShaperSpec s = ShaperSpec::with_delays(tau, 1.0);
  Vector x(3);
  x << 1.0, 0.5 * (lo + hi), -4.0;
  const SpectralAbscissa at_tie = spectral_abscissa_and_gradient(s, x);
  EXPECT_TRUE(at_tie.multiplicity_warning);
  x[1] = 2.0;
  EXPECT_FALSE(spectral_abscissa_and_gradient(s, x).multiplicity_warning);
}

TEST(Spectrum, RejectsBadInput) {
  EXPECT_THROW(rightmost_roots(kSpec18, Vector::Zero(3)), std::invalid_argument);
  Vector x = Vector::Ones(18);
  x[3] = std::nan("");
  EXPECT_THROW(rightmost_roots(kSpec18, x), SpectrumError);
  SpectrumOptions o;
  o.r_min = -kInf;
  EXPECT_THROW(rightmost_roots(kSpec18, Vector::Ones(18), o), std::invalid_argument);
}
