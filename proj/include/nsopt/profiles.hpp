#pragma once

// beta-RMP curves and GL-Profile statistics computed from run histories.

#include "nsopt/core.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nsopt {

struct CurvePoint {
  double x = 0.0;
  std::optional<double> y;
  std::optional<double> err;
};

struct ProfileCurve {
  std::string label;
  std::vector<CurvePoint> points;
  std::vector<std::pair<std::string, std::string>> meta;

  /// x strictly increasing.
  void validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].x > points[i - 1].x)) throw std::logic_error("curve x values must increase");
  }
};

/// Relative difference to the target, clamped at 0 for incumbents below it.
inline double reldiff(double f, double target, double delta_floor = 1e-12) {
  const double r = (f - target) / std::max(std::abs(target), delta_floor);
  return std::max(0.0, r);
}

/// 33 points 1e-16, 1e-15.5, ..., 1 and then +inf.
inline std::vector<double> rmp_tolerance_grid() {
  std::vector<double> x;
  for (int i = 0; i <= 32; ++i) x.push_back(std::pow(10.0, -16.0 + 0.5 * i));
  x.push_back(kInf);
  return x;
}

enum class TargetMode { Fixed, BestKnown, TargetScaling, MedianOfBest };

inline std::string_view to_string(TargetMode m) {
  switch (m) {
    case TargetMode::Fixed: return "fixed";
    case TargetMode::BestKnown: return "best-known";
    case TargetMode::TargetScaling: return "target-scaling";
    case TargetMode::MedianOfBest: return "median";
  }
  return "fixed";
}

inline TargetMode target_mode_from_string(std::string_view s) {
  for (TargetMode m : {TargetMode::Fixed, TargetMode::BestKnown, TargetMode::TargetScaling, TargetMode::MedianOfBest})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown target mode '" + std::string(s) + "'");
}

struct RmpSpec {
  std::vector<double> betas{1.0, 6.0, 12.0, kInf};
  double budget = 1.0;               // b_i for every run unless per_run_budget is set
  std::vector<double> per_run_budget;  // indexed by start_index
  TargetMode target_mode = TargetMode::BestKnown;
  double fixed_target = 0.0;
  FeasibilityTolerances feasibility{};
  double delta_floor = 1e-12;

  double budget_for(const RunHistory& h) const {
    if (per_run_budget.empty()) return budget;
    if (h.start_index < 0 || h.start_index >= static_cast<int>(per_run_budget.size()))
      throw std::invalid_argument("no budget for start index " + std::to_string(h.start_index));
    return per_run_budget[h.start_index];
  }

  void validate() const {
    for (double b : betas)
      if (!(b > 0.0)) throw std::invalid_argument("beta must be positive");
    if (!(budget > 0.0)) throw std::invalid_argument("budget must be positive");
    for (double b : per_run_budget)
      if (!(b > 0.0)) throw std::invalid_argument("budgets must be positive");
    if (!(delta_floor > 0.0)) throw std::invalid_argument("relative-difference floor must be positive");
    feasibility.validate();
  }
};

/// Cost limit beta * b; inf * b stays inf.
inline double scaled_budget(double beta, double b) { return std::isinf(beta) ? kInf : beta * b; }

class NoTargetError : public std::runtime_error {
 public:
  NoTargetError() : std::runtime_error("no feasible iterate available to define a target") {}
};

/// The single target value used by every run of an RMP for the given beta.
inline double resolve_target(const std::vector<RunHistory>& histories, const RmpSpec& spec, double beta) {
  if (spec.target_mode == TargetMode::Fixed) return spec.fixed_target;
  if (histories.empty()) throw std::invalid_argument("no histories");
  if (spec.target_mode == TargetMode::MedianOfBest) {
    std::vector<double> bests;
    for (const RunHistory& h : histories)
      if (auto b = best_feasible_within(h, kInf, spec.feasibility)) bests.push_back(*b);
    if (bests.empty()) throw NoTargetError();
    std::sort(bests.begin(), bests.end());
    const std::size_t m = bests.size();
    return m % 2 ? bests[m / 2] : 0.5 * (bests[m / 2 - 1] + bests[m / 2]);
  }
  std::optional<double> best;
  for (const RunHistory& h : histories) {
    const double limit = spec.target_mode == TargetMode::TargetScaling ? scaled_budget(beta, spec.budget_for(h)) : kInf;
    if (auto b = best_feasible_within(h, limit, spec.feasibility))
      if (!best || *b < *best) best = b;
  }
  if (!best) throw NoTargetError();
  return *best;
}

/// y(x) = percentage of runs whose feasible incumbent within beta * b_i has
/// reldiff to the target <= x.
inline ProfileCurve rmp_curve(const std::vector<RunHistory>& histories, const RmpSpec& spec, double beta,
                              double target, const std::string& label = "") {
  spec.validate();
  if (histories.empty()) throw std::invalid_argument("no histories");
  std::vector<double> rd;
  for (const RunHistory& h : histories)
    if (auto b = best_feasible_within(h, scaled_budget(beta, spec.budget_for(h)), spec.feasibility))
      rd.push_back(reldiff(*b, target, spec.delta_floor));
  const double N = static_cast<double>(histories.size());
  ProfileCurve c;
  c.label = label;
  for (double x : rmp_tolerance_grid()) {
    const auto hit = std::count_if(rd.begin(), rd.end(), [x](double r) { return r <= x; });
    c.points.push_back({x, 100.0 * static_cast<double>(hit) / N, std::nullopt});
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", beta);
  c.meta = {{"beta", buf}, {"N", std::to_string(histories.size())}};
  std::snprintf(buf, sizeof buf, "%.17g", target);
  c.meta.emplace_back("target", buf);
  c.meta.emplace_back("target_mode", std::string(to_string(spec.target_mode)));
  return c;
}

/// Same, with the target resolved from the histories themselves.
inline ProfileCurve rmp_curve(const std::vector<RunHistory>& histories, const RmpSpec& spec, double beta,
                              const std::string& label = "") {
  return rmp_curve(histories, spec, beta, resolve_target(histories, spec, beta), label);
}

// ---------------------------------------------------------------------------
// GL-Profiles

struct GlSpec {
  std::vector<double> budgets{1200.0, 2400.0, 4800.0, 9600.0};  // total, in cost units
  int r_min = 1;
  int r_max = 9;
  FeasibilityTolerances feasibility{};

  void validate() const {
    for (double b : budgets)
      if (!(b > 0.0)) throw std::invalid_argument("GL budgets must be positive");
    if (r_min < 0 || r_max < r_min || r_max > 30) throw std::invalid_argument("need 0 <= r_min <= r_max <= 30");
    feasibility.validate();
  }
};

struct GlStatistic {
  std::optional<double> value;
  std::optional<double> err;
  int blocks = 0;           // |P|
  int feasible_blocks = 0;  // |P^F|
};

/// f*_l for the q = floor(N / M) sequential blocks of M runs, each run with
/// budget T_total / M. Runs are taken in the given order.
inline std::vector<std::optional<double>> gl_block_bests(const std::vector<RunHistory>& histories, double T_total,
                                                         int M, const FeasibilityTolerances& feas) {
  if (M < 1) throw std::invalid_argument("block size must be >= 1");
  if (!(T_total > 0.0)) throw std::invalid_argument("total budget must be positive");
  const int q = static_cast<int>(histories.size()) / M;
  if (q < 1) throw std::invalid_argument("fewer runs than the block size");
  const double t = std::isinf(T_total) ? kInf : T_total / M;
  std::vector<std::optional<double>> out(q);
  for (int l = 0; l < q; ++l)
    for (int i = l * M; i < (l + 1) * M; ++i)
      if (auto b = best_feasible_within(histories[i], t, feas))
        if (!out[l] || *b < *out[l]) out[l] = b;
  return out;
}

/// Mean of f*_l over blocks with a feasible run, and its standard error.
inline GlStatistic gl_objective(const std::vector<RunHistory>& histories, double T_total, int M,
                                const FeasibilityTolerances& feas = {}) {
  const auto bests = gl_block_bests(histories, T_total, M, feas);
  GlStatistic s;
  s.blocks = static_cast<int>(bests.size());
  double sum = 0.0;
  for (const auto& b : bests)
    if (b) {
      sum += *b;
      ++s.feasible_blocks;
    }
  if (s.feasible_blocks == 0) return s;
  const double mean = sum / s.feasible_blocks;
  s.value = mean;
  if (s.feasible_blocks > 1) {
    double ss = 0.0;
    for (const auto& b : bests)
      if (b) ss += (*b - mean) * (*b - mean);
    s.err = std::sqrt(ss / (s.feasible_blocks - 1)) / std::sqrt(static_cast<double>(s.feasible_blocks));
  }
  return s;
}

/// Fraction of blocks with a feasible run, and its binomial standard error.
inline GlStatistic gl_feasibility(const std::vector<RunHistory>& histories, double T_total, int M,
                                  const FeasibilityTolerances& feas = {}) {
  const auto bests = gl_block_bests(histories, T_total, M, feas);
  GlStatistic s;
  s.blocks = static_cast<int>(bests.size());
  s.feasible_blocks = static_cast<int>(std::count_if(bests.begin(), bests.end(), [](const auto& b) { return b.has_value(); }));
  const double c = static_cast<double>(s.feasible_blocks) / s.blocks;
  s.value = c;
  s.err = std::sqrt(c * (1.0 - c) / s.blocks);
  return s;
}

enum class GlKind { Objective, Feasibility };

/// One GL-Profile curve: x = M = 2^r for every r in range with M <= N.
inline ProfileCurve gl_curve(const std::vector<RunHistory>& histories, const GlSpec& spec, double T_total, GlKind kind,
                             const std::string& label = "") {
  spec.validate();
  ProfileCurve c;
  c.label = label;
  for (int r = spec.r_min; r <= spec.r_max; ++r) {
    const int M = 1 << r;
    if (M > static_cast<int>(histories.size())) break;
    const GlStatistic s = kind == GlKind::Objective ? gl_objective(histories, T_total, M, spec.feasibility)
                                                    : gl_feasibility(histories, T_total, M, spec.feasibility);
    c.points.push_back({static_cast<double>(M), s.value, s.err});
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", T_total);
  c.meta = {{"T_total", buf},
            {"N", std::to_string(histories.size())},
            {"kind", kind == GlKind::Objective ? "objective" : "feasibility"}};
  return c;
}

// ---------------------------------------------------------------------------
// curve output

namespace detail {

inline std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Columns x,y,yerr; absent values are empty fields.
inline std::string curve_to_csv(const ProfileCurve& c) {
  std::string out = "x,y,yerr\n";
  for (const CurvePoint& p : c.points) {
    out += detail::csv_number(p.x) + ',';
    if (p.y) out += detail::csv_number(*p.y);
    out += ',';
    if (p.err) out += detail::csv_number(*p.err);
    out += '\n';
  }
  return out;
}

inline nlohmann::json curve_to_json(const ProfileCurve& c) {
  nlohmann::json j;
  j["label"] = c.label;
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : c.meta) meta[k] = v;
  j["meta"] = meta;
  nlohmann::json pts = nlohmann::json::array();
  for (const CurvePoint& p : c.points) {
    nlohmann::json q;
    q["x"] = std::isinf(p.x) ? nlohmann::json("inf") : nlohmann::json(p.x);
    q["y"] = p.y ? nlohmann::json(*p.y) : nlohmann::json(nullptr);
    q["yerr"] = p.err ? nlohmann::json(*p.err) : nlohmann::json(nullptr);
    pts.push_back(q);
  }
  j["points"] = pts;
  return j;
}

}  // namespace nsopt
