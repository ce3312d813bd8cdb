#pragma once

// Batch harness: multi-start runs of both solvers on a shaper instance, history
// files, the cost summary table and the profile outputs built on them.

#include "nsopt/bfgs_sqp.hpp"
#include "nsopt/core.hpp"
#include "nsopt/history_io.hpp"
#include "nsopt/plot_svg.hpp"
#include "nsopt/profiles.hpp"
#include "nsopt/shaper.hpp"
#include "nsopt/sqp_gs.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace nsopt {

namespace fs = std::filesystem;

/// Configuration problems (usage, config file, instance file).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with the history data a command operates on.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct StartSetSpec {
  StartSetKind kind = StartSetKind::Randn;
  int count = 10;
  std::uint64_t seed = 1;
  double lc_scale = 1.0;

  std::string name() const { return std::string(to_string(kind)); }
};

/// "randn:50:7" or "lc:50:7" (kind:count:seed).
inline StartSetSpec parse_start_set(const std::string& s) {
  StartSetSpec spec;
  const auto a = s.find(':');
  const auto b = a == std::string::npos ? std::string::npos : s.find(':', a + 1);
  try {
    spec.kind = start_set_from_string(s.substr(0, a));
    if (a != std::string::npos) spec.count = std::stoi(s.substr(a + 1, b == std::string::npos ? b : b - a - 1));
    if (b != std::string::npos) spec.seed = std::stoull(s.substr(b + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad start set '" + s + "' (expected kind:count:seed)");
  }
  if (spec.count < 1) throw ConfigError("start set '" + s + "' needs a count >= 1");
  return spec;
}

struct BenchConfig {
  std::string instance_path;
  std::vector<std::string> solvers{"bfgs-sqp", "sqp-gs"};
  std::vector<StartSetSpec> start_sets;
  int max_iterations = 1000;
  FeasibilityTolerances feasibility{};
  std::string out_dir = "histories";
  int workers = 1;
  CostMode cost_mode = CostMode::Wall;
  int samples = -1;  // SQP-GS samples per nonsmooth function, -1: 2n
  double rho0 = 1.0;

  void validate() const {
    if (instance_path.empty()) throw ConfigError("no instance file given");
    if (solvers.empty()) throw ConfigError("no solver selected");
    for (const std::string& s : solvers)
      if (s != "bfgs-sqp" && s != "sqp-gs") throw ConfigError("unknown solver '" + s + "'");
    if (start_sets.empty()) throw ConfigError("no start set given");
    std::set<std::string> names;
    for (const StartSetSpec& s : start_sets) {
      if (s.count < 1) throw ConfigError("start set count must be >= 1");
      if (!names.insert(s.name()).second) throw ConfigError("start set '" + s.name() + "' given twice");
    }
    if (max_iterations < 1) throw ConfigError("iteration cap must be >= 1");
    if (workers < 1) throw ConfigError("worker count must be >= 1");
    if (!(rho0 > 0.0)) throw ConfigError("rho0 must be positive");
    if (!(feasibility.eq_viol_tol >= 0.0)) throw ConfigError("eq_viol_tol must be >= 0");
  }
};

/// Config file keys mirror the command-line flags; every key is optional.
inline void apply_config_json(BenchConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    if (j.contains("instance")) cfg.instance_path = j.at("instance").get<std::string>();
    if (j.contains("solver")) {
      const std::string s = j.at("solver").get<std::string>();
      cfg.solvers = s == "both" ? std::vector<std::string>{"bfgs-sqp", "sqp-gs"} : std::vector<std::string>{s};
    }
    if (j.contains("start_sets")) {
      cfg.start_sets.clear();
      for (const auto& s : j.at("start_sets")) {
        StartSetSpec spec;
        spec.kind = start_set_from_string(s.at("kind").get<std::string>());
        spec.count = s.at("count").get<int>();
        spec.seed = s.value("seed", std::uint64_t{1});
        spec.lc_scale = s.value("lc_scale", 1.0);
        cfg.start_sets.push_back(spec);
      }
    }
    if (j.contains("max_iters")) cfg.max_iterations = j.at("max_iters").get<int>();
    if (j.contains("ineq_tol")) cfg.feasibility.ineq_tol = j.at("ineq_tol").get<double>();
    if (j.contains("eq_viol_tol")) cfg.feasibility.eq_viol_tol = j.at("eq_viol_tol").get<double>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    if (j.contains("cost_mode")) cfg.cost_mode = cost_mode_from_string(j.at("cost_mode").get<std::string>());
    if (j.contains("samples")) cfg.samples = j.at("samples").get<int>();
    if (j.contains("rho0")) cfg.rho0 = j.at("rho0").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

struct RunJob {
  std::string solver;
  StartSetSpec set;
  int index = 0;
  Vector x0;
  std::uint64_t seed = 0;

  std::string file_name() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return solver + "__" + set.name() + "__" + buf + ".json";
  }
};

/// Run seed: a fixed mix of the set seed, the set kind and the start index.
inline std::uint64_t run_seed(const StartSetSpec& set, int index) {
  return splitmix64(set.seed ^ splitmix64(static_cast<std::uint64_t>(index) * 2 + (set.kind == StartSetKind::LC)));
}

inline std::vector<RunJob> plan_jobs(const BenchConfig& cfg, int n) {
  std::vector<RunJob> jobs;
  for (const StartSetSpec& set : cfg.start_sets) {
    const auto starts = generate_starts(set.kind, n, set.count, set.seed, set.lc_scale);
    for (const std::string& solver : cfg.solvers)
      for (int i = 0; i < set.count; ++i) jobs.push_back({solver, set, i, starts[i], run_seed(set, i)});
  }
  return jobs;
}

inline RunHistory execute_job(const RunJob& job, const Problem& problem, const BenchConfig& cfg,
                              const std::string& instance_hash) {
  RunHistory h;
  if (job.solver == "bfgs-sqp") {
    BfgsSqpConfig c;
    c.rho0 = cfg.rho0;
    c.max_iterations = cfg.max_iterations;
    c.feasibility = cfg.feasibility;
    c.cost_mode = cfg.cost_mode;
    h = run_bfgs_sqp(problem, job.x0, c);
  } else {
    SqpGsConfig c;
    c.rho0 = cfg.rho0;
    c.samples = cfg.samples;
    c.max_iterations = cfg.max_iterations;
    c.feasibility = cfg.feasibility;
    c.cost_mode = cfg.cost_mode;
    c.seed = job.seed;
    h = run_sqp_gs(problem, job.x0, c);
  }
  h.seed = job.seed;
  h.start_set = job.set.name();
  h.start_index = job.index;
  h.start_id = job.set.name() + ":" + std::to_string(job.set.seed) + ":" + std::to_string(job.index);
  h.instance_hash = instance_hash;
  return h;
}

struct BatchReport {
  int written = 0;
  int skipped = 0;
  int failed = 0;
  std::vector<std::string> messages;
};

/// Runs every planned job not already present in the output directory.
/// A run that throws is stored with an evaluation_failure termination.
inline BatchReport run_batch(const BenchConfig& cfg) {
  cfg.validate();
  std::string text;
  try {
    text = read_text_file(cfg.instance_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  ShaperInstance inst;
  try {
    inst = instance_from_text(text);
  } catch (const InstanceError& e) {
    throw ConfigError(cfg.instance_path + ": " + e.what());
  }
  const std::string hash = sha256_hex(text);
  const Problem problem = build_problem(inst);
  const std::vector<RunJob> jobs = plan_jobs(cfg, inst.n());
  fs::create_directories(cfg.out_dir);

  BatchReport report;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const RunJob& job = jobs[j];
      const fs::path path = fs::path(cfg.out_dir) / job.file_name();
      if (fs::exists(path)) {
        bool reusable = false;
        try {
          reusable = read_history(path).instance_hash == hash;
        } catch (const std::exception&) {
        }
        if (reusable) {
          std::lock_guard<std::mutex> lock(mu);
          ++report.skipped;
          continue;
        }
      }
      RunHistory h;
      bool failed = false;
      std::string why;
      try {
        h = execute_job(job, problem, cfg, hash);
      } catch (const std::exception& e) {
        failed = true;
        why = e.what();
        h = RunHistory{};
        h.solver = job.solver;
        h.iterates.push_back(detail::unevaluable_record(problem, job.x0, cfg.rho0));
        h.termination = Termination::EvaluationFailure;
        h.seed = job.seed;
        h.start_set = job.set.name();
        h.start_index = job.index;
        h.start_id = job.set.name() + ":" + std::to_string(job.set.seed) + ":" + std::to_string(job.index);
        h.instance_hash = hash;
      }
      write_history(path, h);
      std::lock_guard<std::mutex> lock(mu);
      ++report.written;
      if (failed) {
        ++report.failed;
        report.messages.push_back(job.file_name() + ": " + why);
      }
    }
  };
  const int W = std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  if (W == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < W; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return report;
}

// ---------------------------------------------------------------------------
// loading and grouping

/// Every *.json history in `dir`, sorted by (solver, start set, start index).
/// All files must carry the same instance hash.
inline std::vector<RunHistory> load_histories(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  if (files.empty()) throw DataError("no history files in '" + dir.string() + "'");
  std::vector<RunHistory> out;
  for (const fs::path& f : files) {
    try {
      out.push_back(read_history(f));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  for (const RunHistory& h : out)
    if (h.instance_hash != out.front().instance_hash)
      throw DataError("histories come from different instances (hash " + h.instance_hash + " vs " +
                      out.front().instance_hash + ")");
  std::sort(out.begin(), out.end(), [](const RunHistory& a, const RunHistory& b) {
    return std::tie(a.solver, a.start_set, a.start_index) < std::tie(b.solver, b.start_set, b.start_index);
  });
  return out;
}

using GroupKey = std::pair<std::string, std::string>;  // (solver, start set)

inline std::map<GroupKey, std::vector<RunHistory>> group_histories(const std::vector<RunHistory>& hs) {
  std::map<GroupKey, std::vector<RunHistory>> g;
  for (const RunHistory& h : hs) g[{h.solver, h.start_set}].push_back(h);
  return g;
}

inline std::string group_label(const GroupKey& k) { return k.first + " " + k.second; }

// ---------------------------------------------------------------------------
// summary

struct SummaryRow {
  std::string solver;
  std::string start_set;
  int runs = 0;
  double total_cost = 0.0;
  long long total_iterations = 0;
  double cost_per_iteration = 0.0;  // NaN when no iterations
  int feasible_runs = 0;
  std::optional<double> best_objective;
};

struct SummaryRatio {
  std::string start_set;
  double total_cost = 0.0;
  double total_iterations = 0.0;
  double cost_per_iteration = 0.0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::vector<SummaryRatio> ratios;  // sqp-gs divided by bfgs-sqp, per start set
};

inline SummaryTable summarize(const std::vector<RunHistory>& hs, const FeasibilityTolerances& feas = {}) {
  if (hs.empty()) throw DataError("no histories");
  SummaryTable t;
  for (const auto& [key, runs] : group_histories(hs)) {
    SummaryRow r;
    r.solver = key.first;
    r.start_set = key.second;
    for (const RunHistory& h : runs) {
      ++r.runs;
      r.total_cost += h.total_cost();
      r.total_iterations += h.iterations();
      if (auto b = best_feasible_within(h, kInf, feas)) {
        ++r.feasible_runs;
        if (!r.best_objective || *b < *r.best_objective) r.best_objective = b;
      }
    }
    r.cost_per_iteration = r.total_iterations > 0 ? r.total_cost / static_cast<double>(r.total_iterations)
                                                   : std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back(r);
  }
  for (const SummaryRow& gs : t.rows) {
    if (gs.solver != "sqp-gs") continue;
    for (const SummaryRow& bs : t.rows) {
      if (bs.solver != "bfgs-sqp" || bs.start_set != gs.start_set) continue;
      SummaryRatio q;
      q.start_set = gs.start_set;
      q.total_cost = gs.total_cost / bs.total_cost;
      q.total_iterations = static_cast<double>(gs.total_iterations) / static_cast<double>(bs.total_iterations);
      q.cost_per_iteration = gs.cost_per_iteration / bs.cost_per_iteration;
      t.ratios.push_back(q);
    }
  }
  return t;
}

namespace detail {

inline std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return g17(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

inline std::string summary_csv(const SummaryTable& t) {
  using detail::g17;
  std::string out = "solver,start_set,runs,total_cost,total_iterations,cost_per_iteration,feasible_runs,best_objective\n";
  for (const SummaryRow& r : t.rows)
    out += r.solver + ',' + r.start_set + ',' + std::to_string(r.runs) + ',' + g17(r.total_cost) + ',' +
           std::to_string(r.total_iterations) + ',' + g17(r.cost_per_iteration) + ',' + std::to_string(r.feasible_runs) +
           ',' + (r.best_objective ? g17(*r.best_objective) : "") + '\n';
  for (const SummaryRatio& q : t.ratios)
    out += std::string("ratio,") + q.start_set + ",," + g17(q.total_cost) + ',' + g17(q.total_iterations) + ',' +
           g17(q.cost_per_iteration) + ",,\n";
  return out;
}

inline std::string summary_text(const SummaryTable& t) {
  using detail::fixed;
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-9s %-6s %5s %14s %12s %12s %9s %14s\n", "solver", "set", "runs", "total cost",
                "total iters", "cost/iter", "feasible", "best f");
  out += line;
  for (const SummaryRow& r : t.rows) {
    std::snprintf(line, sizeof line, "%-9s %-6s %5d %14s %12lld %12s %9d %14s\n", r.solver.c_str(), r.start_set.c_str(),
                  r.runs, fixed(r.total_cost, 3).c_str(), r.total_iterations, fixed(r.cost_per_iteration, 5).c_str(),
                  r.feasible_runs, r.best_objective ? detail::g17(*r.best_objective).substr(0, 14).c_str() : "-");
    out += line;
  }
  for (const SummaryRatio& q : t.ratios) {
    std::snprintf(line, sizeof line, "ratio sqp-gs/bfgs-sqp %-6s cost %s  iters %s  cost/iter %s\n",
                  q.start_set.c_str(), fixed(q.total_cost, 2).c_str(), fixed(q.total_iterations, 2).c_str(),
                  fixed(q.cost_per_iteration, 2).c_str());
    out += line;
  }
  return out;
}

/// Runs with their best feasible objective: infeasible runs first, then
/// decreasing best objective (ties by start index).
inline std::vector<std::pair<int, std::optional<double>>> best_value_listing(const std::vector<RunHistory>& runs,
                                                                             const FeasibilityTolerances& feas = {}) {
  std::vector<std::pair<int, std::optional<double>>> v;
  for (const RunHistory& h : runs) v.emplace_back(h.start_index, best_feasible_within(h, kInf, feas));
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second.has_value() != b.second.has_value()) return !a.second.has_value();
    if (!a.second) return a.first < b.first;
    if (*a.second != *b.second) return *a.second > *b.second;
    return a.first < b.first;
  });
  return v;
}

inline std::string best_values_csv(const std::vector<RunHistory>& hs, const FeasibilityTolerances& feas = {}) {
  std::string out = "solver,start_set,rank,start_index,best_objective\n";
  for (const auto& [key, runs] : group_histories(hs)) {
    int rank = 0;
    for (const auto& [idx, best] : best_value_listing(runs, feas))
      out += key.first + ',' + key.second + ',' + std::to_string(rank++) + ',' + std::to_string(idx) + ',' +
             (best ? detail::g17(*best) : "") + '\n';
  }
  return out;
}

/// One panel per start set; infeasible runs drawn as markers along the top edge.
inline std::string best_values_svg(const std::vector<RunHistory>& hs, const FeasibilityTolerances& feas = {}) {
  std::map<std::string, svg::Panel> panels;
  const auto groups = group_histories(hs);
  double top = 0.0;
  for (const RunHistory& h : hs)
    if (auto b = best_feasible_within(h, kInf, feas)) top = std::max(top, *b);
  if (!(top > 0.0)) top = 1.0;
  std::size_t colour = 0;
  std::map<std::string, std::string> colours;
  for (const auto& [key, runs] : groups) {
    if (!colours.count(key.first)) colours[key.first] = svg::palette()[colour++ % svg::palette().size()];
    svg::Panel& p = panels[key.second];
    p.title = "best objective per start, " + key.second;
    p.xlabel = "run (sorted)";
    p.ylabel = "best feasible objective";
    p.xscale = svg::Scale::Linear;
    p.yscale = svg::Scale::Log10;
    svg::Series feasible, infeasible;
    feasible.label = key.first;
    feasible.color = colours[key.first];
    infeasible.label = key.first + " infeasible";
    infeasible.color = colours[key.first];
    infeasible.lines = false;
    int rank = 0;
    for (const auto& [idx, best] : best_value_listing(runs, feas)) {
      (best ? feasible : infeasible).x.push_back(rank++);
      (best ? feasible : infeasible).y.push_back(best ? *best : top * 2.0);
    }
    p.series.push_back(feasible);
    if (!infeasible.x.empty()) p.series.push_back(infeasible);
  }
  std::vector<svg::Panel> v;
  for (auto& [name, p] : panels) v.push_back(p);
  return svg::render(v, 2);
}

// ---------------------------------------------------------------------------
// profile outputs

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string file_number(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Budget spec "median:<solver>:<start set>" resolves to the median total cost
/// of that group; anything else must be a positive number.
inline double resolve_budget(const std::string& spec, const std::vector<RunHistory>& hs) {
  if (spec.rfind("median:", 0) == 0) {
    const auto colon = spec.find(':', 7);
    if (colon == std::string::npos) throw ConfigError("budget must look like median:<solver>:<set>");
    const std::string solver = spec.substr(7, colon - 7), set = spec.substr(colon + 1);
    std::vector<double> c;
    for (const RunHistory& h : hs)
      if (h.solver == solver && h.start_set == set) c.push_back(h.total_cost());
    if (c.empty()) throw DataError("no runs for budget group " + solver + " " + set);
    std::sort(c.begin(), c.end());
    const std::size_t m = c.size();
    const double med = m % 2 ? c[m / 2] : 0.5 * (c[m / 2 - 1] + c[m / 2]);
    if (!(med > 0.0)) throw DataError("median budget is zero");
    return med;
  }
  double b = 0.0;
  try {
    std::size_t used = 0;
    b = std::stod(spec, &used);
    if (used != spec.size()) throw std::invalid_argument(spec);
  } catch (const std::exception&) {
    throw ConfigError("bad budget '" + spec + "'");
  }
  if (!(b > 0.0)) throw ConfigError("budget must be positive");
  return b;
}

/// Writes one CSV per (beta, group), rmp.json and the panel SVG. Returns the curves.
inline std::vector<ProfileCurve> write_rmp_outputs(const std::vector<RunHistory>& hs, const RmpSpec& spec,
                                                   const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  std::vector<ProfileCurve> all;
  std::vector<svg::Panel> panels;
  nlohmann::json doc = nlohmann::json::array();
  const auto groups = group_histories(hs);
  for (double beta : spec.betas) {
    double target = 0.0;
    try {
      target = resolve_target(hs, spec, beta);
    } catch (const NoTargetError& e) {
      throw DataError(std::string(e.what()) + " (beta " + file_number(beta) + ")");
    }
    svg::Panel p;
    p.title = "beta = " + file_number(beta);
    p.xlabel = "relative difference tolerance";
    p.ylabel = "% runs solved";
    p.xscale = svg::Scale::Log10;
    p.ylim = std::make_pair(0.0, 100.0);
    std::size_t gi = 0;
    for (const auto& [key, runs] : groups) {
      ProfileCurve c = rmp_curve(runs, spec, beta, target, group_label(key));
      write_text(out_dir / ("rmp_beta_" + file_number(beta) + "__" + key.first + "__" + key.second + ".csv"),
                 curve_to_csv(c));
      doc.push_back(curve_to_json(c));
      svg::Series s;
      s.label = c.label;
      s.color = svg::palette()[(gi / 2) % svg::palette().size()];
      s.dashed = gi % 2 == 1;
      ++gi;
      for (const CurvePoint& q : c.points) {
        s.x.push_back(q.x);
        s.y.push_back(*q.y);
      }
      p.series.push_back(s);
      all.push_back(std::move(c));
    }
    panels.push_back(p);
  }
  write_text(out_dir / "rmp.json", doc.dump(2) + "\n");
  write_text(out_dir / "rmp_panel.svg", svg::render(panels, 2));
  return all;
}

/// Objective and feasibility GL curves for every budget, as CSV, gl.json and two panel SVGs.
inline std::vector<ProfileCurve> write_gl_outputs(const std::vector<RunHistory>& hs, const GlSpec& spec,
                                                  const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  std::vector<ProfileCurve> all;
  nlohmann::json doc = nlohmann::json::array();
  const auto groups = group_histories(hs);
  for (GlKind kind : {GlKind::Objective, GlKind::Feasibility}) {
    const std::string kname = kind == GlKind::Objective ? "objective" : "feasibility";
    std::vector<svg::Panel> panels;
    for (double T : spec.budgets) {
      svg::Panel p;
      p.title = "total budget " + file_number(T);
      p.xlabel = "number of starting points";
      p.ylabel = kind == GlKind::Objective ? "expected best objective" : "P(feasible found)";
      p.xscale = svg::Scale::Log2;
      p.yscale = kind == GlKind::Objective ? svg::Scale::Log10 : svg::Scale::Linear;
      if (kind == GlKind::Feasibility) p.ylim = std::make_pair(0.0, 1.0);
      std::size_t gi = 0;
      for (const auto& [key, runs] : groups) {
        ProfileCurve c = gl_curve(runs, spec, T, kind, group_label(key));
        write_text(out_dir / ("gl_" + kname + "_T" + file_number(T) + "__" + key.first + "__" + key.second + ".csv"),
                   curve_to_csv(c));
        doc.push_back(curve_to_json(c));
        svg::Series s;
        s.label = c.label;
        s.color = svg::palette()[(gi / 2) % svg::palette().size()];
        s.dashed = gi % 2 == 1;
        ++gi;
        for (const CurvePoint& q : c.points) {
          s.x.push_back(q.x);
          s.y.push_back(q.y ? *q.y : std::numeric_limits<double>::quiet_NaN());
          s.err.push_back(q.err ? *q.err : std::numeric_limits<double>::quiet_NaN());
        }
        p.series.push_back(s);
        all.push_back(std::move(c));
      }
      panels.push_back(p);
    }
    write_text(out_dir / ("gl_" + kname + "_panel.svg"), svg::render(panels, 2));
  }
  write_text(out_dir / "gl.json", doc.dump(2) + "\n");
  return all;
}

}  // namespace nsopt
