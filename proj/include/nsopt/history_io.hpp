#pragma once

// Run history files: one JSON object per run. Numbers are written with 17
// significant digits so a parsed history reproduces every double exactly.
// Non-finite values (unevaluable starting points) are written as null and read
// back as +inf.

#include "nsopt/core.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nsopt {

inline constexpr const char* kHistoryFormat = "nsopt-history/1";

class HistoryFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void put_vector(std::string& out, const Vector& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    put_number(out, v[i]);
  }
  out += ']';
}

inline void put_string(std::string& out, const std::string& s) { out += nlohmann::json(s).dump(); }

inline double get_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw HistoryFormatError(std::string("missing field '") + key + "'");
  const nlohmann::json& v = j[key];
  if (v.is_null()) return kInf;
  if (!v.is_number()) throw HistoryFormatError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline Vector get_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw HistoryFormatError(std::string("field '") + key + "' must be an array");
  const nlohmann::json& a = j[key];
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_null())
      v[static_cast<Eigen::Index>(i)] = kInf;
    else if (a[i].is_number())
      v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    else
      throw HistoryFormatError(std::string("field '") + key + "' must hold numbers");
  }
  return v;
}

inline std::string get_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    throw HistoryFormatError(std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace detail

/// Serialized form; one iterate per line.
inline std::string history_to_json(const RunHistory& h) {
  using namespace detail;
  std::string out = "{\n";
  out += "  \"format\": ";
  put_string(out, kHistoryFormat);
  out += ",\n  \"solver\": ";
  put_string(out, h.solver);
  out += ",\n  \"start_id\": ";
  put_string(out, h.start_id);
  out += ",\n  \"start_set\": ";
  put_string(out, h.start_set);
  out += ",\n  \"start_index\": " + std::to_string(h.start_index);
  out += ",\n  \"seed\": " + std::to_string(h.seed);
  out += ",\n  \"instance_hash\": ";
  put_string(out, h.instance_hash);
  out += ",\n  \"termination\": ";
  put_string(out, std::string(to_string(h.termination)));
  out += ",\n  \"steering_fallbacks\": " + std::to_string(h.steering_fallbacks);
  out += ",\n  \"iterates\": [";
  for (std::size_t i = 0; i < h.iterates.size(); ++i) {
    const IterateRecord& r = h.iterates[i];
    out += i ? ",\n    " : "\n    ";
    out += "{\"k\": " + std::to_string(r.k) + ", \"f\": ";
    put_number(out, r.f);
    out += ", \"rho\": ";
    put_number(out, r.rho);
    out += ", \"cost\": ";
    put_number(out, r.cost);
    out += ", \"stationarity\": ";
    put_number(out, r.stationarity);
    out += ", \"x\": ";
    put_vector(out, r.x);
    out += ", \"c_ineq\": ";
    put_vector(out, r.c_ineq);
    out += ", \"c_eq\": ";
    put_vector(out, r.c_eq);
    out += '}';
  }
  out += "\n  ]\n}\n";
  return out;
}

inline RunHistory history_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw HistoryFormatError("history must be a JSON object");
  if (get_string(j, "format") != kHistoryFormat) throw HistoryFormatError("unsupported history format");
  RunHistory h;
  h.solver = get_string(j, "solver");
  h.start_id = get_string(j, "start_id");
  h.start_set = get_string(j, "start_set");
  h.instance_hash = get_string(j, "instance_hash");
  try {
    h.termination = termination_from_string(get_string(j, "termination"));
  } catch (const std::invalid_argument& e) {
    throw HistoryFormatError(e.what());
  }
  if (!j.contains("start_index") || !j["start_index"].is_number_integer())
    throw HistoryFormatError("field 'start_index' must be an integer");
  h.start_index = j["start_index"].get<int>();
  if (!j.contains("seed") || !j["seed"].is_number_unsigned())
    throw HistoryFormatError("field 'seed' must be a non-negative integer");
  h.seed = j["seed"].get<std::uint64_t>();
  h.steering_fallbacks = j.value("steering_fallbacks", 0);
  if (!j.contains("iterates") || !j["iterates"].is_array()) throw HistoryFormatError("field 'iterates' must be an array");
  for (const nlohmann::json& it : j["iterates"]) {
    IterateRecord r;
    if (!it.contains("k") || !it["k"].is_number_integer()) throw HistoryFormatError("iterate without index");
    r.k = it["k"].get<int>();
    r.f = get_number(it, "f");
    r.rho = get_number(it, "rho");
    r.cost = get_number(it, "cost");
    r.stationarity = get_number(it, "stationarity");
    r.x = get_vector(it, "x");
    r.c_ineq = get_vector(it, "c_ineq");
    r.c_eq = get_vector(it, "c_eq");
    h.iterates.push_back(std::move(r));
  }
  try {
    h.validate();
  } catch (const std::invalid_argument& e) {
    throw HistoryFormatError(e.what());
  }
  return h;
}

inline RunHistory history_from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw HistoryFormatError(std::string("not valid JSON: ") + e.what());
  }
  return history_from_json(j);
}

inline void write_history(const std::filesystem::path& path, const RunHistory& h) {
  // write-then-rename so an interrupted batch never leaves a truncated file behind
  std::filesystem::path tmp = path;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << history_to_json(h);
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline RunHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return history_from_text(ss.str());
  } catch (const HistoryFormatError& e) {
    throw HistoryFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace nsopt
