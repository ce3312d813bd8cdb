#include "nsopt/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsopt;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

RunHistory history_with(std::vector<double> f, std::vector<double> cost, std::vector<double> c) {
  RunHistory h;
  for (std::size_t i = 0; i < f.size(); ++i) {
    IterateRecord r;
    r.k = static_cast<int>(i);
    r.x = Vector::Zero(1);
    r.f = f[i];
    r.c_ineq = vec({c[i]});
    r.c_eq = Vector();
    r.cost = cost[i];
    h.iterates.push_back(r);
  }
  return h;
}

}  // namespace

TEST(Violation, Examples) {
  EXPECT_DOUBLE_EQ(violation(vec({0.5, -0.3}), Vector()), 0.5);
  EXPECT_DOUBLE_EQ(violation(vec({-1, -2}), vec({0, 0})), 0.0);
  EXPECT_NEAR(violation(vec({0.1}), vec({-0.2})), 0.3, 1e-15);
}

TEST(Violation, ConcatenationIsAdditive) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  for (int t = 0; t < 100; ++t) {
    Vector a(3), b(4), e1(2), e2(1);
    for (auto* v : {&a, &b, &e1, &e2})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = N(rng);
    Vector ab(7), e(3);
    ab << a, b;
    e << e1, e2;
    EXPECT_NEAR(violation(ab, e), violation(a, e1) + violation(b, e2), 1e-14);
    EXPECT_GE(violation(ab, e), 0.0);
  }
}

TEST(Penalty, Examples) {
  EXPECT_DOUBLE_EQ(penalty(1, 2, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(penalty(1, -3, 0), -3);
  EXPECT_DOUBLE_EQ(penalty(0.25, 4, 1), 2);
  EXPECT_THROW(penalty(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(penalty(-1, 1, 1), std::invalid_argument);
}

TEST(Penalty, StrictlyIncreasingInObjectiveAndViolation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-10, 10), R(1e-3, 10), D(1e-6, 1);
  for (int t = 0; t < 200; ++t) {
    const double rho = R(rng), f = U(rng), v = std::abs(U(rng)), d = D(rng);
    EXPECT_LT(penalty(rho, f, v), penalty(rho, f + d, v));
    EXPECT_LT(penalty(rho, f, v), penalty(rho, f, v + d));
  }
}

TEST(Feasibility, Examples) {
  const FeasibilityTolerances tol{0.0, 1e-8};
  EXPECT_TRUE(is_feasible(vec({-0.01}), vec({1e-9}), tol));
  EXPECT_FALSE(is_feasible(vec({0}), vec({0}), tol));
  EXPECT_FALSE(is_feasible(vec({-1}), vec({2e-8}), tol));
}

TEST(Feasibility, FeasibleImpliesSmallEqualityViolation) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N(0, 1e-8);
  const FeasibilityTolerances tol{0.0, 1e-8};
  for (int t = 0; t < 500; ++t) {
    Vector ci = vec({N(rng), N(rng)}), ce = vec({N(rng), N(rng)});
    if (is_feasible(ci, ce, tol)) EXPECT_LE(equality_violation(ce), tol.eq_viol_tol);
  }
}

TEST(Feasibility, NonFiniteIsInfeasible) {
  EXPECT_FALSE(is_feasible(vec({kInf}), vec({0}), {}));
  EXPECT_FALSE(is_feasible(vec({-1}), vec({kInf}), {}));
}

TEST(BestFeasibleWithin, Examples) {
  const RunHistory h = history_with({3, 1, 2}, {1, 2, 3}, {-1, -1, -1});
  EXPECT_EQ(best_feasible_within(h, 2, {}), 1.0);
  const RunHistory g = history_with({5, 3, 1, 2}, {0, 1, 2, 3}, {1, -1, -1, -1});
  EXPECT_FALSE(best_feasible_within(g, 0.5, {}).has_value());
  const RunHistory bad = history_with({1, 2}, {0, 1}, {1, 0});
  EXPECT_FALSE(best_feasible_within(bad, kInf, {}).has_value());
  EXPECT_THROW(best_feasible_within(h, -1, {}), std::invalid_argument);
}

TEST(BestFeasibleWithin, NonIncreasingInCostLimit) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0, 1), C(-1, 0.3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> f, cost, c;
    double acc = 0;
    for (int i = 0; i < 30; ++i) {
      f.push_back(U(rng));
      cost.push_back(i == 0 ? 0.0 : (acc += U(rng)));
      c.push_back(C(rng));
    }
    const RunHistory h = history_with(f, cost, c);
    std::optional<double> prev;
    for (double lim = 0; lim <= acc + 1; lim += 0.25) {
      const auto b = best_feasible_within(h, lim, {});
      if (prev) {
        ASSERT_TRUE(b.has_value());
        EXPECT_LE(*b, *prev);
      }
      if (b) prev = b;
    }
  }
}

TEST(RunHistory, Validation) {
  RunHistory h = history_with({1, 2, 3}, {0, 1, 1}, {0, 0, 0});
  EXPECT_NO_THROW(h.validate());
  EXPECT_EQ(h.iterations(), 2);
  h.iterates[2].cost = 0.5;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h.iterates[2].cost = 2;
  h.iterates[0].cost = 0.1;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h.iterates[0].cost = 0;
  h.iterates[1].k = 5;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  EXPECT_THROW(RunHistory{}.validate(), std::invalid_argument);
}

TEST(Termination, StringRoundTrip) {
  for (Termination t : {Termination::Stationarity, Termination::MaxIterations, Termination::LineSearchFailure,
                        Termination::SubproblemFailure, Termination::EvaluationFailure})
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  EXPECT_THROW(termination_from_string("bogus"), std::invalid_argument);
}

TEST(CostClock, UnitAndAverageModes) {
  CostClock unit(CostMode::Unit);
  EXPECT_EQ(unit.stamp(0), 0.0);
  EXPECT_EQ(unit.stamp(7), 7.0);

  RunHistory h = history_with({1, 1, 1, 1, 1}, {0, 0.1, 0.5, 0.6, 2.0}, {0, 0, 0, 0, 0});
  CostClock avg(CostMode::Average);
  avg.finalize(h);
  for (const auto& r : h.iterates) EXPECT_DOUBLE_EQ(r.cost, 0.5 * r.k);
  EXPECT_NO_THROW(h.validate());
}

TEST(PenaltyGradient, MatchesFiniteDifferencesAwayFromKinks) {
  Problem p;
  p.dimension = 2;
  p.objective = {"f", [](const Vector& x) { return FunctionValue{x[0] * x[0] + 3 * x[1], vec({2 * x[0], 3})}; }};
  p.inequalities.push_back({"c1", [](const Vector& x) { return FunctionValue{x[0] - 1, vec({1, 0})}; }});
  p.inequalities.push_back({"c2", [](const Vector& x) { return FunctionValue{x[0] * x[1], vec({x[1], x[0]})}; }});
  p.equalities.push_back({"e", [](const Vector& x) { return FunctionValue{x[0] + x[1] - 0.5, vec({1, 1})}; }});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const Vector x = vec({U(rng), U(rng)});
    const double rho = 0.3;
    const Vector g = penalty_gradient(rho, p.evaluate(x));
    for (int i = 0; i < 2; ++i) {
      Vector a = x, b = x;
      a[i] += 1e-7;
      b[i] -= 1e-7;
      const double fd = (penalty_value(rho, p.evaluate(a)) - penalty_value(rho, p.evaluate(b))) / 2e-7;
      EXPECT_NEAR(g[i], fd, 1e-5);
    }
  }
}
