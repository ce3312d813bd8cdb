#pragma once

// Distributed-delay input shaper design problem:
//
//   min x'Hx / R^2
//   s.t. -(x_1 + ... + x_l) <= 0,  l = 1..n-1     (non-decreasing step response)
//        alpha_D(x) - alpha_c <= 0                 (zeros spectral abscissa, nonsmooth)
//        x_1 + ... + x_n = 0
//        gamma - sum x_k tau_k - 1 = 0             (unit static gain)
//
// plus the two families of starting points and the instance file format.

#include "nsopt/core.hpp"
#include "nsopt/delay_spectrum.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsopt {

/// Instance-file problem; `field` names the offending JSON field.
class InstanceError : public std::runtime_error {
 public:
  InstanceError(const std::string& field, const std::string& what)
      : std::runtime_error("instance field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DefaultHSpec {
  double omega_lo = 0.0;  // <= 0 selects pi / T
  double omega_hi = 0.0;  // <= 0 selects 3 pi / T
  int grid = 200;
};

struct ShaperInstance {
  ShaperSpec spec;
  Matrix H;
  double R_nom = 1.0;
  double alpha_c = -0.1;
  std::string H_source = "file";  // "file" or "default_H"
  DefaultHSpec default_h{};
  SpectrumOptions spectrum{};

  int n() const { return spec.size(); }

  void validate() const {
    if (spec.size() < 2) throw InstanceError("n", "need at least two delays");
    if (!(spec.gamma > 0.0)) throw InstanceError("gamma", "must be positive");
    if (H.rows() != n() || H.cols() != n()) throw InstanceError("H", "must be n x n");
    if (!H.allFinite()) throw InstanceError("H", "has non-finite entries");
    if (!(H - H.transpose()).isZero(1e-12 * (1.0 + H.cwiseAbs().maxCoeff())))
      throw InstanceError("H", "must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InstanceError("H", "must be positive definite");
    if (!(R_nom > 0.0)) throw InstanceError("R_nom", "must be positive");
    if (!(alpha_c <= 0.0)) throw InstanceError("alpha_c", "must be <= 0");
  }
};

/// Stand-in residual-vibration weight: midpoint quadrature over [omega_lo, omega_hi]
/// of Re(g g*) with g_k(w) = exp(-i w tau_k) / (i w), i.e.
///   H_kl = sum_m dw cos(w_m (tau_k - tau_l)) / w_m^2,
/// symmetrized and ridged by 1e-10 tr(H)/n. Returns (H, R_nom = 1).
inline std::pair<Matrix, double> default_H(const ShaperSpec& spec, double omega_lo, double omega_hi, int M) {
  const int n = spec.size();
  if (!(0.0 < omega_lo && omega_lo < omega_hi)) throw std::invalid_argument("need 0 < omega_lo < omega_hi");
  if (M < n) throw std::invalid_argument("grid size must be >= n");
  const double dw = (omega_hi - omega_lo) / M;
  Matrix H = Matrix::Zero(n, n);
  for (int m = 0; m < M; ++m) {
    const double w = omega_lo + (m + 0.5) * dw;
    const double c = dw / (w * w);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l <= k; ++l) H(k, l) += c * std::cos(w * (spec.delays[k] - spec.delays[l]));
  }
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < k; ++l) H(l, k) = H(k, l);
  H.diagonal().array() += 1e-10 * H.trace() / n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw std::runtime_error("default_H is not positive definite");
  return {H, 1.0};
}

inline std::pair<Matrix, double> default_H(const ShaperSpec& spec, const DefaultHSpec& d) {
  const double T = spec.max_delay();
  const double pi = std::acos(-1.0);
  return default_H(spec, d.omega_lo > 0.0 ? d.omega_lo : pi / T, d.omega_hi > 0.0 ? d.omega_hi : 3.0 * pi / T,
                   d.grid);
}

/// The 18-delay benchmark instance: T = 0.8, gamma = 0.01, alpha_c = -0.1.
inline ShaperInstance paper_instance() {
  ShaperInstance inst;
  inst.spec = ShaperSpec::equally_spaced(18, 0.8, 0.01);
  inst.alpha_c = -0.1;
  inst.H_source = "default_H";
  auto [H, R] = default_H(inst.spec, inst.default_h);
  inst.H = std::move(H);
  inst.R_nom = R;
  return inst;
}

inline Problem build_problem(const ShaperInstance& inst) {
  inst.validate();
  const int n = inst.n();
  Problem p;
  p.dimension = n;
  const Matrix H = inst.H;
  const double scale = 1.0 / (inst.R_nom * inst.R_nom);
  p.objective = {"residual_vibration",
                 [H, scale](const Vector& x) {
                   Vector Hx = H * x;
                   return FunctionValue{scale * x.dot(Hx), 2.0 * scale * Hx};
                 },
                 false};
  for (int l = 1; l <= n - 1; ++l) {
    p.inequalities.push_back({"prefix_sum_" + std::to_string(l),
                              [l, n](const Vector& x) {
                                Vector g = Vector::Zero(n);
                                g.head(l).setConstant(-1.0);
                                return FunctionValue{-x.head(l).sum(), g};
                              },
                              false});
  }
  const ShaperSpec spec = inst.spec;
  const double alpha_c = inst.alpha_c;
  const SpectrumOptions opts = inst.spectrum;
  p.inequalities.push_back({"stability",
                            [spec, alpha_c, opts](const Vector& x) {
                              return stability_constraint(spec, x, alpha_c, opts);
                            },
                            true});
  p.equalities.push_back({"zero_sum", [n](const Vector& x) { return FunctionValue{x.sum(), Vector::Ones(n)}; },
                          false});
  Vector tau = Eigen::Map<const Vector>(spec.delays.data(), n);
  const double gamma = spec.gamma;
  p.equalities.push_back({"static_gain",
                          [tau, gamma](const Vector& x) { return FunctionValue{gamma - tau.dot(x) - 1.0, -tau}; },
                          false});
  return p;
}

enum class StartSetKind { Randn, LC };

inline std::string_view to_string(StartSetKind k) { return k == StartSetKind::Randn ? "randn" : "lc"; }

inline StartSetKind start_set_from_string(std::string_view s) {
  if (s == "randn" || s == "RANDN") return StartSetKind::Randn;
  if (s == "lc" || s == "LC") return StartSetKind::LC;
  throw std::invalid_argument("unknown start set '" + std::string(s) + "'");
}

/// randn: i.i.d. N(0,1) coordinates. lc: partial sums p_l ~ U[0, lc_scale],
/// x_1 = p_1, x_k = p_k - p_{k-1}, x_n = -p_{n-1}, so every prefix sum is >= 0
/// and the entries sum to zero.
inline std::vector<Vector> generate_starts(StartSetKind kind, int n, int count, std::uint64_t seed,
                                           double lc_scale = 1.0) {
  if (n < 2) throw std::invalid_argument("need n >= 2");
  if (count < 1) throw std::invalid_argument("need at least one starting point");
  if (!(lc_scale > 0.0)) throw std::invalid_argument("LC scale must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  out.reserve(count);
  if (kind == StartSetKind::Randn) {
    std::normal_distribution<double> N(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      Vector x(n);
      for (int k = 0; k < n; ++k) x[k] = N(rng);
      out.push_back(std::move(x));
    }
  } else {
    std::uniform_real_distribution<double> U(0.0, lc_scale);
    for (int i = 0; i < count; ++i) {
      Vector p(n - 1);
      for (int l = 0; l < n - 1; ++l) p[l] = U(rng);
      Vector x(n);
      x[0] = p[0];
      for (int k = 1; k < n - 1; ++k) x[k] = p[k] - p[k - 1];
      x[n - 1] = -p[n - 2];
      out.push_back(std::move(x));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// instance file

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw InstanceError(key, "missing");
  if (!j[key].is_number()) throw InstanceError(key, "must be a number");
  return j[key].get<double>();
}

}  // namespace detail

inline ShaperInstance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InstanceError("<root>", "must be a JSON object");
  ShaperInstance inst;
  if (!j.contains("n")) throw InstanceError("n", "missing");
  if (!j["n"].is_number_integer()) throw InstanceError("n", "must be an integer");
  const int n = j["n"].get<int>();
  if (n < 2) throw InstanceError("n", "must be >= 2");
  const double T = detail::require_number(j, "T");
  if (!(T > 0.0)) throw InstanceError("T", "must be positive");
  const double gamma = detail::require_number(j, "gamma");
  if (!(gamma > 0.0)) throw InstanceError("gamma", "must be positive");
  inst.spec = ShaperSpec::equally_spaced(n, T, gamma);
  inst.alpha_c = detail::require_number(j, "alpha_c");
  if (!(inst.alpha_c <= 0.0)) throw InstanceError("alpha_c", "must be <= 0");
  inst.R_nom = j.contains("R_nom") ? detail::require_number(j, "R_nom") : 1.0;
  if (!(inst.R_nom > 0.0)) throw InstanceError("R_nom", "must be positive");

  if (!j.contains("H")) throw InstanceError("H", "missing");
  const nlohmann::json& h = j["H"];
  if (h.is_object()) {
    if (!h.contains("default_H")) throw InstanceError("H", "object form needs a 'default_H' directive");
    const nlohmann::json& d = h["default_H"];
    if (!d.is_object()) throw InstanceError("H.default_H", "must be an object");
    if (d.contains("omega_lo")) inst.default_h.omega_lo = detail::require_number(d, "omega_lo");
    if (d.contains("omega_hi")) inst.default_h.omega_hi = detail::require_number(d, "omega_hi");
    if (d.contains("grid")) {
      if (!d["grid"].is_number_integer()) throw InstanceError("H.default_H.grid", "must be an integer");
      inst.default_h.grid = d["grid"].get<int>();
    }
    try {
      auto [H, R] = default_H(inst.spec, inst.default_h);
      inst.H = std::move(H);
    } catch (const std::exception& e) {
      throw InstanceError("H.default_H", e.what());
    }
    inst.H_source = "default_H";
  } else if (h.is_array()) {
    inst.H.resize(n, n);
    if (static_cast<int>(h.size()) == n * n && (h.empty() || h[0].is_number())) {
      for (int i = 0; i < n * n; ++i) {
        if (!h[i].is_number()) throw InstanceError("H", "entries must be numbers");
        inst.H(i / n, i % n) = h[i].get<double>();
      }
    } else if (static_cast<int>(h.size()) == n) {
      for (int r = 0; r < n; ++r) {
        if (!h[r].is_array() || static_cast<int>(h[r].size()) != n) throw InstanceError("H", "rows must have n entries");
        for (int c = 0; c < n; ++c) {
          if (!h[r][c].is_number()) throw InstanceError("H", "entries must be numbers");
          inst.H(r, c) = h[r][c].get<double>();
        }
      }
    } else {
      throw InstanceError("H", "must have n*n entries (row-major) or n rows");
    }
    inst.H_source = "file";
  } else {
    throw InstanceError("H", "must be an array or a default_H directive");
  }

  if (j.contains("spectrum")) {
    const nlohmann::json& s = j["spectrum"];
    if (!s.is_object()) throw InstanceError("spectrum", "must be an object");
    if (s.contains("r_min")) inst.spectrum.r_min = detail::require_number(s, "r_min");
    if (s.contains("omega_max")) inst.spectrum.omega_max = detail::require_number(s, "omega_max");
    if (s.contains("cheb_order")) {
      if (!s["cheb_order"].is_number_integer()) throw InstanceError("spectrum.cheb_order", "must be an integer");
      inst.spectrum.cheb_order = s["cheb_order"].get<int>();
      if (inst.spectrum.cheb_order < 4) throw InstanceError("spectrum.cheb_order", "must be >= 4");
    }
  }
  inst.validate();
  return inst;
}

inline nlohmann::json instance_to_json(const ShaperInstance& inst) {
  nlohmann::json j;
  j["n"] = inst.n();
  j["T"] = inst.spec.max_delay();
  j["gamma"] = inst.spec.gamma;
  j["alpha_c"] = inst.alpha_c;
  j["R_nom"] = inst.R_nom;
  if (inst.H_source == "default_H") {
    nlohmann::json d = nlohmann::json::object();
    if (inst.default_h.omega_lo > 0.0) d["omega_lo"] = inst.default_h.omega_lo;
    if (inst.default_h.omega_hi > 0.0) d["omega_hi"] = inst.default_h.omega_hi;
    d["grid"] = inst.default_h.grid;
    j["H"] = {{"default_H", d}};
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < inst.n(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < inst.n(); ++c) row.push_back(inst.H(r, c));
      rows.push_back(row);
    }
    j["H"] = rows;
  }
  j["spectrum"] = {{"r_min", inst.spectrum.r_min}, {"cheb_order", inst.spectrum.cheb_order}};
  if (inst.spectrum.omega_max > 0.0) j["spectrum"]["omega_max"] = inst.spectrum.omega_max;
  return j;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ShaperInstance instance_from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InstanceError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return instance_from_json(j);
}

}  // namespace nsopt
