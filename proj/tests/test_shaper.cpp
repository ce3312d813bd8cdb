#include "nsopt/shaper.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace nsopt;
namespace to = testing_oracles;

namespace {

ShaperInstance small_instance(int n) {
  ShaperInstance inst;
  inst.spec = ShaperSpec::equally_spaced(n, 0.8, 0.01);
  inst.H_source = "default_H";
  inst.H = default_H(inst.spec, inst.default_h).first;
  return inst;
}

nlohmann::json paper_json() {
  return nlohmann::json::parse(read_text_file(std::string(NSOPT_DATA_DIR) + "/paper_instance.json"));
}

std::string error_field(const nlohmann::json& j) {
  try {
    instance_from_json(j);
  } catch (const InstanceError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(BuildProblem, Structure) {
  const Problem p = build_problem(small_instance(5));
  EXPECT_EQ(p.dimension, 5);
  ASSERT_EQ(p.num_inequalities(), 5);  // 4 prefix sums + stability
  ASSERT_EQ(p.num_equalities(), 2);
  EXPECT_TRUE(p.inequalities.back().nonsmooth);
  for (int j = 0; j < 4; ++j) EXPECT_FALSE(p.inequalities[j].nonsmooth);
  EXPECT_FALSE(p.objective.nonsmooth);
}

TEST(BuildProblem, ZeroGainsHaveZeroObjective) {
  const Problem p = build_problem(small_instance(4));
  const PointEvaluation e = p.evaluate(Vector::Zero(4));
  EXPECT_EQ(e.f, 0.0);
  EXPECT_TRUE(e.grad_f.isZero());
  EXPECT_EQ(e.c_ineq[e.c_ineq.size() - 1], -1e6);
}

TEST(BuildProblem, LinearConstraintsAtPositivePrefixSums) {
  const Problem p = build_problem(small_instance(4));
  Vector x(4);
  x << 0.5, 0.25, -0.5, -0.25;  // prefix sums 0.5, 0.75, 0.25, total 0
  const PointEvaluation e = p.evaluate(x);
  EXPECT_EQ(e.c_ineq[0], -0.5);
  EXPECT_EQ(e.c_ineq[1], -0.75);
  EXPECT_EQ(e.c_ineq[2], -0.25);
  EXPECT_EQ(e.c_eq[0], 0.0);
}

TEST(BuildProblem, LinearJacobiansAreConstantAndAnalytic) {
  const ShaperInstance inst = small_instance(6);
  const Problem p = build_problem(inst);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N;
  for (int t = 0; t < 5; ++t) {
    Vector x(6);
    for (int k = 0; k < 6; ++k) x[k] = N(rng);
    const PointEvaluation e = p.evaluate(x);
    for (int l = 1; l <= 5; ++l)
      for (int k = 0; k < 6; ++k) EXPECT_EQ(e.jac_ineq(l - 1, k), k < l ? -1.0 : 0.0);
    for (int k = 0; k < 6; ++k) {
      EXPECT_EQ(e.jac_eq(0, k), 1.0);
      EXPECT_EQ(e.jac_eq(1, k), -inst.spec.delays[k]);
    }
    EXPECT_NEAR(e.f, x.dot(inst.H * x), 1e-14 * (1 + e.f));
    auto f = [&](const Vector& y) { return p.evaluate(y).f; };
    EXPECT_LE((to::central_difference(f, x, 1e-6) - e.grad_f).norm(), 1e-6 * (1 + e.grad_f.norm()));
  }
}

TEST(BuildProblem, TwoDelaysHaveOneLinearFeasiblePoint) {
  const double T = 0.8, gamma = 0.01;
  ShaperInstance inst = small_instance(2);
  const Problem p = build_problem(inst);
  Vector x(2);
  x[1] = (gamma - 1.0) / T;
  x[0] = -x[1];
  const PointEvaluation e = p.evaluate(x);
  EXPECT_NEAR(e.c_eq[0], 0.0, 1e-15);
  EXPECT_NEAR(e.c_eq[1], 0.0, 1e-15);
  // the 2x2 system [1 1; 0 -T] x = [0; 1 - gamma] has exactly this solution
  const Matrix A = (Matrix(2, 2) << 1, 1, 0, -T).finished();
  EXPECT_LE((A.fullPivLu().solve(Vector::Unit(2, 1) * (1 - gamma)) - x).norm(), 1e-14);
}

TEST(Starts, LcPointsSatisfyLinearConstraintsForEverySeed) {
  const Problem p = build_problem(small_instance(18));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Vector x = generate_starts(StartSetKind::LC, 18, 1, seed)[0];
    double prefix = 0.0;
    for (int l = 0; l < 17; ++l) {
      prefix += x[l];
      ASSERT_GE(prefix, -1e-15) << "seed " << seed;
      // the constraint value -prefix_l, evaluated directly
      ASSERT_LE(p.inequalities[l].evaluate(x).value, 1e-15) << "seed " << seed;
    }
    ASSERT_NEAR(x.sum(), 0.0, 1e-14) << "seed " << seed;
  }
}

TEST(Starts, LcPartialSumMeanIsHalfScale) {
  const double c = 2.5;
  const auto xs = generate_starts(StartSetKind::LC, 6, 10000, 11, c);
  for (int l = 0; l < 5; ++l) {
    double sum = 0.0;
    for (const Vector& x : xs) sum += x.head(l + 1).sum();
    const double mean = sum / xs.size();
    const double se = c / std::sqrt(12.0) / std::sqrt(static_cast<double>(xs.size()));
    EXPECT_NEAR(mean, c / 2, 3 * se) << "l = " << l + 1;
  }
}

TEST(Starts, RandnIsReproducible) {
  const auto a = generate_starts(StartSetKind::Randn, 18, 2, 7);
  const auto b = generate_starts(StartSetKind::Randn, 18, 2, 7);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_NE(a[0], a[1]);
  EXPECT_NE(a[0], generate_starts(StartSetKind::Randn, 18, 1, 8)[0]);
  EXPECT_THROW(generate_starts(StartSetKind::LC, 1, 1, 0), std::invalid_argument);
  EXPECT_EQ(start_set_from_string("LC"), StartSetKind::LC);
  EXPECT_THROW(start_set_from_string("uniform"), std::invalid_argument);
}

TEST(DefaultH, SymmetricPositiveDefinite) {
  const ShaperInstance inst = small_instance(18);
  EXPECT_LE((inst.H - inst.H.transpose()).norm(), 1e-14 * inst.H.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(inst.H);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(DefaultH, TwoDelayEntriesMatchIntegrals) {
  // H_kl = int cos(w (tau_k - tau_l)) / w^2 dw over [lo, hi]
  const double T = 0.8, lo = 2.0, hi = 10.0;
  const ShaperSpec s = ShaperSpec::equally_spaced(2, T, 0.01);
  const Matrix H = default_H(s, lo, hi, 400).first;
  EXPECT_NEAR(H(0, 0), 1.0 / lo - 1.0 / hi, 1e-5);
  EXPECT_NEAR(H(1, 1), 1.0 / lo - 1.0 / hi, 1e-5);
  // composite Simpson on a fine grid as the reference for the off-diagonal entry
  const int M = 20000;
  const double h = (hi - lo) / M;
  double simpson = 0.0;
  for (int i = 0; i <= M; ++i) {
    const double w = lo + i * h;
    simpson += (i == 0 || i == M ? 1 : (i % 2 ? 4 : 2)) * std::cos(w * T) / (w * w);
  }
  simpson *= h / 3;
  EXPECT_NEAR(H(0, 1), simpson, 1e-4);
  EXPECT_THROW(default_H(s, 0.0, 1.0, 10), std::invalid_argument);
  EXPECT_THROW(default_H(s, 1.0, 2.0, 1), std::invalid_argument);
}

TEST(InstanceFile, PaperInstanceParameters) {
  const ShaperInstance inst = instance_from_json(paper_json());
  EXPECT_EQ(inst.n(), 18);
  EXPECT_EQ(inst.spec.max_delay(), 0.8);
  EXPECT_EQ(inst.spec.gamma, 0.01);
  EXPECT_EQ(inst.alpha_c, -0.1);
  EXPECT_EQ(inst.H_source, "default_H");
  EXPECT_EQ(inst.H, paper_instance().H);
}

TEST(InstanceFile, RoundTrip) {
  for (bool inline_H : {false, true}) {
    ShaperInstance inst = paper_instance();
    if (inline_H) inst.H_source = "file";
    inst.spectrum.omega_max = 120.0;
    const ShaperInstance back = instance_from_text(instance_to_json(inst).dump());
    EXPECT_EQ(back.n(), inst.n());
    EXPECT_EQ(back.spec.delays, inst.spec.delays);
    EXPECT_EQ(back.spec.gamma, inst.spec.gamma);
    EXPECT_EQ(back.alpha_c, inst.alpha_c);
    EXPECT_EQ(back.R_nom, inst.R_nom);
    EXPECT_EQ(back.H, inst.H);
    EXPECT_EQ(back.H_source, inst.H_source);
    EXPECT_EQ(back.spectrum.omega_max, 120.0);
    EXPECT_EQ(back.spectrum.r_min, inst.spectrum.r_min);
  }
}

TEST(InstanceFile, ErrorsNameTheField) {
  nlohmann::json j = paper_json();
  j.erase("gamma");
  EXPECT_EQ(error_field(j), "gamma");
  j = paper_json();
  j["alpha_c"] = 0.5;
  EXPECT_EQ(error_field(j), "alpha_c");
  j = paper_json();
  j["n"] = 2.5;
  EXPECT_EQ(error_field(j), "n");
  j = paper_json();
  j["H"] = {{1.0, 2.0}, {0.0, 1.0}};
  j["n"] = 2;
  EXPECT_EQ(error_field(j), "H");
  j["H"] = {{1.0, 0.0}, {0.0, -1.0}};
  EXPECT_EQ(error_field(j), "H");
  j = paper_json();
  j["H"]["default_H"]["grid"] = "many";
  EXPECT_EQ(error_field(j), "H.default_H.grid");
  j = paper_json();
  j["spectrum"]["cheb_order"] = 2;
  EXPECT_EQ(error_field(j), "spectrum.cheb_order");
  EXPECT_THROW(instance_from_text("{not json"), InstanceError);
}
