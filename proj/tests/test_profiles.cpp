#include "nsopt/history_io.hpp"
#include "nsopt/profiles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsopt;

namespace {

/// History with one iterate per (cost, f, feasible) triple.
RunHistory run(std::vector<std::tuple<double, double, bool>> pts, int index = 0) {
  RunHistory h;
  h.start_index = index;
  int k = 0;
  for (auto [cost, f, feas] : pts) {
    IterateRecord r;
    r.k = k++;
    r.x = Vector::Zero(1);
    r.f = f;
    r.cost = cost;
    r.c_ineq = Vector::Constant(1, feas ? -1.0 : 1.0);
    r.c_eq = Vector::Zero(0);
    h.iterates.push_back(r);
  }
  return h;
}

/// Single-iterate history: feasible with value f, or infeasible when f is empty.
RunHistory best_is(std::optional<double> f, int index = 0) {
  return run({{0.0, f.value_or(0.0), f.has_value()}}, index);
}

std::vector<RunHistory> random_histories(std::uint64_t seed, int N) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<RunHistory> hs;
  for (int i = 0; i < N; ++i) {
    std::vector<std::tuple<double, double, bool>> pts;
    double cost = 0.0, f = 1.0 + U(rng);
    const int len = 1 + static_cast<int>(U(rng) * 30);
    for (int k = 0; k < len; ++k) {
      pts.emplace_back(cost, f, U(rng) < 0.4);
      cost += U(rng);
      f -= 0.05 * U(rng);
    }
    hs.push_back(run(pts, i));
  }
  return hs;
}

double y_at(const ProfileCurve& c, double x) {
  for (const CurvePoint& p : c.points)
    if (p.x == x) return *p.y;
  ADD_FAILURE() << "x not on grid: " << x;
  return -1;
}

}  // namespace

TEST(RelDiff, Definition) {
  EXPECT_EQ(reldiff(3.0, 2.0), 0.5);
  EXPECT_EQ(reldiff(1.0, 2.0), 0.0);
  EXPECT_EQ(reldiff(-1.0, -2.0), 0.5);
  EXPECT_EQ(reldiff(1e-13, 0.0, 1e-12), 0.1);
}

TEST(RelDiff, ToleranceGrid) {
  const auto g = rmp_tolerance_grid();
  ASSERT_EQ(g.size(), 34u);
  EXPECT_EQ(g.front(), 1e-16);
  EXPECT_EQ(g[32], 1.0);
  EXPECT_TRUE(std::isinf(g.back()));
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
}

TEST(Rmp, ThreeRunExample) {
  // incumbents {t, 1.5 t, infeasible}, t = 2, floor 1
  const std::vector<RunHistory> hs{best_is(2.0), best_is(3.0), best_is(std::nullopt)};
  RmpSpec spec;
  spec.target_mode = TargetMode::Fixed;
  spec.fixed_target = 2.0;
  spec.delta_floor = 1.0;
  const ProfileCurve c = rmp_curve(hs, spec, kInf);
  EXPECT_NEAR(c.points.front().y.value(), 100.0 / 3, 1e-12);
  EXPECT_NEAR(y_at(c, std::pow(10.0, -0.5)), 100.0 / 3, 1e-12);
  EXPECT_NEAR(y_at(c, 1.0), 200.0 / 3, 1e-12);
  EXPECT_NEAR(c.points.back().y.value(), 200.0 / 3, 1e-12);
  // at x = 0.5 exactly, the definition gives 2 of 3
  std::vector<double> rd{reldiff(2.0, 2.0, 1.0), reldiff(3.0, 2.0, 1.0)};
  EXPECT_EQ(std::count_if(rd.begin(), rd.end(), [](double r) { return r <= 0.5; }), 2);
}

TEST(Rmp, AllRunsOnTargetGiveFullCurve) {
  const std::vector<RunHistory> hs{best_is(-4.0), best_is(-4.0)};
  RmpSpec spec;
  const ProfileCurve c = rmp_curve(hs, spec, 1.0);
  for (const CurvePoint& p : c.points) EXPECT_EQ(*p.y, 100.0);
}

TEST(Rmp, InfiniteToleranceIsFeasibilityRate) {
  // 922 of 1000 feasible -> 92.2 at x = inf
  std::vector<RunHistory> hs;
  for (int i = 0; i < 1000; ++i) hs.push_back(best_is(i < 922 ? std::optional<double>(1.0 + i) : std::nullopt, i));
  RmpSpec spec;
  EXPECT_NEAR(rmp_curve(hs, spec, kInf).points.back().y.value(), 92.2, 1e-12);
}

TEST(Rmp, Targets) {
  const std::vector<RunHistory> hs{best_is(1.0), best_is(3.0), best_is(std::nullopt)};
  RmpSpec spec;
  spec.target_mode = TargetMode::Fixed;
  spec.fixed_target = 6.915e-5;
  EXPECT_EQ(resolve_target(hs, spec, 1.0), 6.915e-5);
  spec.target_mode = TargetMode::BestKnown;
  EXPECT_EQ(resolve_target(hs, spec, 1.0), 1.0);
  spec.target_mode = TargetMode::MedianOfBest;
  EXPECT_EQ(resolve_target(hs, spec, 1.0), 2.0);
  const std::vector<RunHistory> none{best_is(std::nullopt)};
  for (TargetMode m : {TargetMode::BestKnown, TargetMode::MedianOfBest, TargetMode::TargetScaling}) {
    spec.target_mode = m;
    EXPECT_THROW(resolve_target(none, spec, 1.0), NoTargetError);
  }
  EXPECT_EQ(target_mode_from_string("target-scaling"), TargetMode::TargetScaling);
}

TEST(Rmp, TargetScalingRespectsBudget) {
  // feasible only after cost 5
  const std::vector<RunHistory> hs{run({{0, 9, false}, {5, 4, true}, {8, 2, true}})};
  RmpSpec spec;
  spec.target_mode = TargetMode::TargetScaling;
  spec.budget = 1.0;
  EXPECT_THROW(resolve_target(hs, spec, 0.5), NoTargetError);
  EXPECT_EQ(resolve_target(hs, spec, 6.0), 4.0);
  EXPECT_EQ(resolve_target(hs, spec, kInf), 2.0);
}

TEST(Rmp, PerRunBudgets) {
  const std::vector<RunHistory> hs{run({{0, 5, true}, {2, 1, true}}, 0), run({{0, 5, true}, {2, 1, true}}, 1)};
  RmpSpec spec;
  spec.target_mode = TargetMode::Fixed;
  spec.fixed_target = 1.0;
  spec.per_run_budget = {1.0, 3.0};
  EXPECT_EQ(y_at(rmp_curve(hs, spec, 1.0), 1e-16), 50.0);
  spec.per_run_budget = {1.0};
  EXPECT_THROW(rmp_curve(hs, spec, 1.0), std::invalid_argument);
}

TEST(Rmp, CurvesAreMonotoneAndNestedInBeta) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto hs = random_histories(seed, 25);
    RmpSpec spec;
    spec.budget = 2.0;
    spec.target_mode = TargetMode::Fixed;
    spec.fixed_target = resolve_target(hs, RmpSpec{}, kInf);
    std::vector<ProfileCurve> cs;
    for (double beta : {0.5, 1.0, 4.0, 12.0, kInf}) cs.push_back(rmp_curve(hs, spec, beta));
    for (const ProfileCurve& c : cs) {
      ASSERT_NO_THROW(c.validate());
      for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_GE(*c.points[i].y, *c.points[i - 1].y);
      for (const CurvePoint& p : c.points) EXPECT_TRUE(*p.y >= 0.0 && *p.y <= 100.0);
    }
    for (std::size_t b = 1; b < cs.size(); ++b)
      for (std::size_t i = 0; i < cs[b].points.size(); ++i) EXPECT_GE(*cs[b].points[i].y, *cs[b - 1].points[i].y);
  }
}

TEST(Gl, HandExample) {
  const std::vector<RunHistory> hs{best_is(1.0), best_is(std::nullopt), best_is(2.0), best_is(3.0)};
  const GlStatistic s = gl_objective(hs, 10.0, 2);
  EXPECT_EQ(s.blocks, 2);
  EXPECT_EQ(s.feasible_blocks, 2);
  EXPECT_DOUBLE_EQ(s.value.value(), 1.5);
  EXPECT_DOUBLE_EQ(s.err.value(), 0.5);
  const GlStatistic one = gl_objective(hs, 10.0, 4);
  EXPECT_DOUBLE_EQ(one.value.value(), 1.0);
  EXPECT_FALSE(one.err.has_value());
  const std::vector<RunHistory> bad(4, best_is(std::nullopt));
  EXPECT_FALSE(gl_objective(bad, 10.0, 2).value.has_value());
}

TEST(Gl, FeasibilityExamples) {
  std::vector<RunHistory> hs{best_is(1.0), best_is(std::nullopt), best_is(std::nullopt), best_is(std::nullopt)};
  GlStatistic s = gl_feasibility(hs, 1.0, 1);
  EXPECT_DOUBLE_EQ(s.value.value(), 0.25);
  EXPECT_NEAR(s.err.value(), std::sqrt(0.25 * 0.75 / 4), 1e-15);
  EXPECT_NEAR(s.err.value(), 0.2165, 5e-5);
  hs = {best_is(1.0), best_is(2.0)};
  s = gl_feasibility(hs, 1.0, 1);
  EXPECT_EQ(s.value.value(), 1.0);
  EXPECT_EQ(s.err.value(), 0.0);
  s = gl_feasibility(hs, 1.0, 2);
  EXPECT_EQ(s.blocks, 1);
  EXPECT_EQ(s.value.value(), 1.0);
  EXPECT_EQ(s.err.value(), 0.0);
}

TEST(Gl, BudgetIsSplitOverBlock) {
  // feasible value 1 at cost 3; with T = 8 and M = 2 each run gets 4, with M = 4 only 2
  const std::vector<RunHistory> hs(4, run({{0, 5, false}, {3, 1, true}}));
  EXPECT_EQ(gl_objective(hs, 8.0, 2).value.value(), 1.0);
  EXPECT_FALSE(gl_objective(hs, 8.0, 4).value.has_value());
  // leftover runs beyond q * M are omitted
  EXPECT_EQ(gl_block_bests(random_histories(1, 7), 10.0, 2, {}).size(), 3u);
  EXPECT_THROW(gl_block_bests(hs, 8.0, 5, {}), std::invalid_argument);
}

TEST(Gl, BlockOfOneGivesPerRunBests) {
  const auto hs = random_histories(3, 30);
  const auto bests = gl_block_bests(hs, 30.0 * 4.0, 30, {});
  ASSERT_EQ(bests.size(), 1u);
  const auto per_run = gl_block_bests(hs, 4.0, 1, {});
  ASSERT_EQ(per_run.size(), 30u);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(per_run[i], best_feasible_within(hs[i], 4.0, {}));
}

TEST(Gl, WholeSetWithUnlimitedBudget) {
  // M = N, T = inf: the single block's best is the best over all runs' global bests
  const auto hs = random_histories(5, 16);
  std::optional<double> ref;
  for (const RunHistory& h : hs)
    if (auto b = best_feasible_within(h, kInf, {}))
      if (!ref || *b < *ref) ref = b;
  const GlStatistic s = gl_objective(hs, kInf, 16);
  EXPECT_EQ(s.value, ref);
  // and with M = 1 the statistic is the mean of per-run bests over feasible runs
  double sum = 0;
  int cnt = 0;
  for (const RunHistory& h : hs)
    if (auto b = best_feasible_within(h, kInf, {})) sum += *b, ++cnt;
  EXPECT_DOUBLE_EQ(gl_objective(hs, kInf, 1).value.value(), sum / cnt);
}

TEST(Gl, CurveUsesPowersOfTwoUpToN) {
  const auto hs = random_histories(8, 20);
  GlSpec spec;
  spec.r_min = 0;
  const ProfileCurve c = gl_curve(hs, spec, 40.0, GlKind::Feasibility);
  ASSERT_EQ(c.points.size(), 5u);  // 1, 2, 4, 8, 16
  for (std::size_t i = 0; i < c.points.size(); ++i) EXPECT_EQ(c.points[i].x, std::pow(2.0, i));
  EXPECT_NO_THROW(c.validate());
}

TEST(Profiles, SerializedHistoriesGiveIdenticalResults) {
  const auto hs = random_histories(13, 32);
  std::vector<RunHistory> back;
  for (const RunHistory& h : hs) back.push_back(history_from_text(history_to_json(h)));
  GlSpec gs;
  gs.r_min = 0;
  gs.r_max = 5;
  for (double T : {5.0, 40.0, kInf})
    for (GlKind k : {GlKind::Objective, GlKind::Feasibility})
      EXPECT_EQ(curve_to_csv(gl_curve(hs, gs, T, k)), curve_to_csv(gl_curve(back, gs, T, k)));
  RmpSpec rs;
  for (double beta : {1.0, 6.0, kInf}) EXPECT_EQ(curve_to_csv(rmp_curve(hs, rs, beta)), curve_to_csv(rmp_curve(back, rs, beta)));
}

TEST(Profiles, CsvAndJsonOutput) {
  ProfileCurve c;
  c.label = "bfgs-sqp / lc";
  c.points = {{1.0, 0.5, std::nullopt}, {2.0, std::nullopt, std::nullopt}, {kInf, 0.25, 0.125}};
  c.meta = {{"N", "3"}};
  EXPECT_EQ(curve_to_csv(c), "x,y,yerr\n1,0.5,\n2,,\ninf,0.25,0.125\n");
  const nlohmann::json j = curve_to_json(c);
  EXPECT_EQ(j["points"][2]["x"], "inf");
  EXPECT_TRUE(j["points"][1]["y"].is_null());
  EXPECT_EQ(j["meta"]["N"], "3");
  c.points[1].x = 0.5;
  EXPECT_THROW(c.validate(), std::logic_error);
}
