#pragma once

// Experiment configuration: a strict JSON document whose keys mirror the
// command-line flags. Flags given on the command line override file values.
//
//   {
//     "kind": "phase",            // or "convergence"
//     "d1": 64, "d2": 64, "r": 4,
//     "p_values": [0.5],
//     "variants": ["HM", "COL"],
//     "rho_values": [1.0, 1.2],   // phase sweeps
//     "rho": 2.0,                 // convergence runs
//     "trials": 20,               // phase: instances per rho
//     "base_seed": 1,
//     "tol_rel_change": 1e-10, "max_iters": 3000, "success_tol": 1e-3,
//     "threads": 0,               // 0 = hardware concurrency
//     "output_dir": "out"
//   }

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmirls/errors.hpp"
#include "hmirls/measurements.hpp"
#include "hmirls/problem_io.hpp"
#include "hmirls/weights.hpp"

namespace hmirls::experiments {

enum class Kind { convergence, phase };

struct ExperimentConfig {
  Kind kind = Kind::convergence;
  Index d1 = 40;
  Index d2 = 40;
  Index r = 10;
  std::vector<double> p_values{0.5};
  std::vector<Variant> variants{Variant::HM};
  std::vector<double> rho_values;
  double rho = 2.0;
  int trials = 1;
  std::uint64_t base_seed = 1;
  double tol_rel_change = 1e-10;
  int max_iters = 3000;
  double success_tol = 1e-3;
  int threads = 0;
  std::string output_dir = ".";

  /// Throws ParameterError on any inconsistent field.
  void validate() const {
    if (d1 < 1 || d2 < 1) throw ParameterError("config: d1 and d2 must be positive");
    if (r < 1 || r >= std::min(d1, d2)) throw ParameterError("config: r must lie in [1, min(d1, d2))");
    if (p_values.empty()) throw ParameterError("config: p_values must not be empty");
    for (double p : p_values) {
      if (!(p > 0.0 && p <= 1.0)) throw ParameterError("config: every p must lie in (0, 1]");
    }
    if (variants.empty()) throw ParameterError("config: variants must not be empty");
    if (trials < 1) throw ParameterError("config: trials must be >= 1");
    if (!(tol_rel_change > 0.0)) throw ParameterError("config: tol_rel_change must be positive");
    if (max_iters < 1) throw ParameterError("config: max_iters must be >= 1");
    if (!(success_tol > 0.0)) throw ParameterError("config: success_tol must be positive");
    if (threads < 0) throw ParameterError("config: threads must be >= 0");
    const std::vector<double> rhos = kind == Kind::phase ? rho_values : std::vector<double>{rho};
    if (rhos.empty()) throw ParameterError("config: rho_values must not be empty for a phase sweep");
    for (double x : rhos) check_rho(x);
  }

  /// rho must give a mask that can hold r samples in every row and column.
  void check_rho(double x) const {
    if (!(x > 0.0) || !std::isfinite(x)) throw ParameterError("config: rho must be positive");
    const Index m = measurements_for(x, d1, d2, r);
    if (m > d1 * d2) throw ParameterError("config: rho gives m > d1*d2");
    if (m < r * std::max(d1, d2)) {
      throw ParameterError("config: rho = " + format_double(x) + " gives m = " + std::to_string(m) +
                           ", too few for r samples per row and column");
    }
  }
};

inline std::string to_string(Kind k) { return k == Kind::phase ? "phase" : "convergence"; }

inline Kind parse_kind(const std::string& s) {
  if (s == "phase") return Kind::phase;
  if (s == "convergence") return Kind::convergence;
  throw ParameterError("unknown experiment kind '" + s + "' (expected convergence or phase)");
}

namespace config_detail {

using json = nlohmann::json;

inline std::vector<double> read_doubles(const json& v, const std::string& field) {
  const Vector x = io_detail::read_vector(v, field);
  return std::vector<double>(x.data(), x.data() + x.size());
}

inline int read_int(const json& v, const std::string& field, int lo) {
  return static_cast<int>(io_detail::read_index(v, field, lo));
}

}  // namespace config_detail

/// Fields present in `text` overwrite those of `base`.
inline ExperimentConfig config_from_string(const std::string& text, ExperimentConfig base = {}) {
  using config_detail::json;
  const json doc = io_detail::parse_text(text);
  io_detail::require_keys(doc, "",
                          {"kind", "d1", "d2", "r", "p_values", "variants", "rho_values", "rho", "trials",
                           "base_seed", "tol_rel_change", "max_iters", "success_tol", "threads", "output_dir"},
                          {});
  ExperimentConfig c = std::move(base);
  try {
    if (doc.contains("kind")) {
      if (!doc["kind"].is_string()) throw ParseError("kind", "expected a string");
      c.kind = parse_kind(doc["kind"].get<std::string>());
    }
  } catch (const ParameterError& ex) {
    throw ParseError("kind", ex.what());
  }
  if (doc.contains("d1")) c.d1 = io_detail::read_index(doc["d1"], "d1", 1);
  if (doc.contains("d2")) c.d2 = io_detail::read_index(doc["d2"], "d2", 1);
  if (doc.contains("r")) c.r = io_detail::read_index(doc["r"], "r", 1);
  if (doc.contains("p_values")) c.p_values = config_detail::read_doubles(doc["p_values"], "p_values");
  if (doc.contains("variants")) {
    const json& v = doc["variants"];
    if (!v.is_array()) throw ParseError("variants", "expected an array of strings");
    c.variants.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string f = "variants[" + std::to_string(i) + "]";
      if (!v[i].is_string()) throw ParseError(f, "expected a string");
      try {
        c.variants.push_back(parse_variant(v[i].get<std::string>()));
      } catch (const ParameterError& ex) {
        throw ParseError(f, ex.what());
      }
    }
  }
  if (doc.contains("rho_values")) c.rho_values = config_detail::read_doubles(doc["rho_values"], "rho_values");
  if (doc.contains("rho")) c.rho = io_detail::read_double(doc["rho"], "rho");
  if (doc.contains("trials")) c.trials = config_detail::read_int(doc["trials"], "trials", 1);
  if (doc.contains("base_seed")) {
    const json& s = doc["base_seed"];
    if (!s.is_number_unsigned()) throw ParseError("base_seed", "expected a non-negative integer");
    c.base_seed = s.get<std::uint64_t>();
  }
  if (doc.contains("tol_rel_change")) c.tol_rel_change = io_detail::read_double(doc["tol_rel_change"], "tol_rel_change");
  if (doc.contains("max_iters")) c.max_iters = config_detail::read_int(doc["max_iters"], "max_iters", 1);
  if (doc.contains("success_tol")) c.success_tol = io_detail::read_double(doc["success_tol"], "success_tol");
  if (doc.contains("threads")) c.threads = config_detail::read_int(doc["threads"], "threads", 0);
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ParseError("output_dir", "expected a string");
    c.output_dir = doc["output_dir"].get<std::string>();
  }
  return c;
}

inline ExperimentConfig read_config(const std::string& path, ExperimentConfig base = {}) {
  return config_from_string(io_detail::slurp(path), std::move(base));
}

}  // namespace hmirls::experiments
