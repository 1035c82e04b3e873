#pragma once

// Invariant checks over a solve trace: epsilon and objective monotonicity,
// constraint feasibility, stationarity of each weighted least-squares step
// and the empirical convergence order.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmirls/diagnostics.hpp"
#include "hmirls/experiments/csv.hpp"
#include "hmirls/solver.hpp"

namespace hmirls::experiments {

/// The problem and trace files do not describe the same run.
class MismatchError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

struct CheckItem {
  enum class Outcome { pass, fail, note };
  std::string name;
  Outcome outcome = Outcome::note;
  std::string detail;
};

inline const char* to_string(CheckItem::Outcome o) {
  switch (o) {
    case CheckItem::Outcome::pass: return "PASS";
    case CheckItem::Outcome::fail: return "FAIL";
    case CheckItem::Outcome::note: return "NOTE";
  }
  return "?";
}

struct CheckReport {
  std::vector<CheckItem> items;

  bool ok() const {
    for (const auto& i : items)
      if (i.outcome == CheckItem::Outcome::fail) return false;
    return true;
  }

  std::string text() const {
    std::string out;
    for (const auto& i : items) out += std::string(to_string(i.outcome)) + "  " + i.name + ": " + i.detail + "\n";
    out += ok() ? "all checks passed\n" : "one or more checks FAILED\n";
    return out;
  }

  std::string json() const {
    nlohmann::ordered_json j;
    j["ok"] = ok();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& i : items) {
      j["checks"].push_back({{"name", i.name}, {"outcome", to_string(i.outcome)}, {"detail", i.detail}});
    }
    return j.dump(2) + "\n";
  }
};

struct CheckTolerances {
  double feasibility = 1e-9;
  double objective_slack = 1e-10;  // relative
  double stationarity = 1e-8;
  // a residual within this many rounding floors is attributed to storing the
  // iterate in double precision
  double rounding_factor = 10.0;
  double order_tolerance = 0.25;
};

namespace check_detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Series {
  std::vector<double> epsilon, g, rel_error, feasibility, stationarity, floor;
  Variant variant = Variant::HM;
  double p = 1.0;
};

inline void add_monotone(CheckReport& rep, const std::string& name, const std::vector<double>& v, double rel_slack) {
  for (std::size_t n = 1; n < v.size(); ++n) {
    if (!(v[n] <= v[n - 1] + rel_slack * std::abs(v[n - 1]))) {
      rep.items.push_back({name, CheckItem::Outcome::fail,
                           "increases at iteration " + std::to_string(n + 1) + " (" + sci(v[n - 1]) + " -> " +
                               sci(v[n]) + ")"});
      return;
    }
  }
  rep.items.push_back({name, CheckItem::Outcome::pass, "non-increasing over " + std::to_string(v.size()) + " iterations"});
}

inline void add_order(CheckReport& rep, const Series& s, const CheckTolerances& tol) {
  if (s.rel_error.empty() || std::isnan(s.rel_error.front())) {
    rep.items.push_back({"convergence_order", CheckItem::Outcome::note, "no ground truth; order not estimated"});
    return;
  }
  OrderFit fit;
  try {
    fit = fit_convergence_order(s.rel_error);
  } catch (const InsufficientData& ex) {
    rep.items.push_back({"convergence_order", CheckItem::Outcome::note, std::string("insufficient data: ") + ex.what()});
    return;
  }
  char buf[160];
  const double expect = 2.0 - s.p;
  std::snprintf(buf, sizeof buf, "order %.3f from %d values (expected %.3f +- %.2f for HM)", fit.order, fit.points_used,
                expect, tol.order_tolerance);
  if (s.variant != Variant::HM) {
    rep.items.push_back({"convergence_order", CheckItem::Outcome::note, buf});
    return;
  }
  const bool ok = std::abs(fit.order - expect) <= tol.order_tolerance;
  rep.items.push_back({"convergence_order", ok ? CheckItem::Outcome::pass : CheckItem::Outcome::fail, buf});
}

}  // namespace check_detail

/// Checks a trace read back from CSV against its problem. Feasibility and
/// stationarity need the iterates and are covered by check_run.
inline CheckReport check_trace(const ProblemInstance& inst, const std::vector<TraceRow>& rows,
                               const CheckTolerances& tol = {}) {
  if (rows.empty()) throw MismatchError("trace has no iterations");
  check_detail::Series s;
  try {
    s.variant = parse_variant(rows.front().variant);
  } catch (const ParameterError&) {
    throw MismatchError("trace names an unknown variant '" + rows.front().variant + "'");
  }
  s.p = rows.front().p;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.iter != static_cast<int>(k) + 1) throw MismatchError("trace iterations are not numbered 1, 2, ...");
    if (r.variant != rows.front().variant || r.p != s.p) throw MismatchError("trace mixes several runs");
    if (std::isnan(r.rel_error) == inst.ground_truth.has_value()) {
      throw MismatchError(inst.ground_truth ? "problem has ground truth but the trace has no rel_error"
                                            : "trace has rel_error but the problem has no ground truth");
    }
    s.epsilon.push_back(r.epsilon);
    s.g.push_back(r.g_eps_p);
    s.rel_error.push_back(r.rel_error);
  }
  if (inst.ground_truth) {
    // the first iterate is the minimum-norm interpolant for every variant
    const WeightState w0 = identity_weight_state(inst.d1, inst.d2, s.p, s.variant);
    SolverConfig cfg;
    const double e1 = relative_error(weighted_ls_step(inst.op, inst.y, w0, cfg), *inst.ground_truth);
    if (std::abs(e1 - s.rel_error.front()) > 1e-8 * std::max(1.0, e1)) {
      throw MismatchError("first-iteration error " + check_detail::sci(s.rel_error.front()) +
                          " does not match this problem (" + check_detail::sci(e1) + ")");
    }
  }
  CheckReport rep;
  check_detail::add_monotone(rep, "epsilon_monotone", s.epsilon, 0.0);
  check_detail::add_monotone(rep, "objective_monotone", s.g, tol.objective_slack);
  check_detail::add_order(rep, s, tol);
  return rep;
}

/// Re-runs the solve and checks every iterate.
inline CheckReport check_run(const ProblemInstance& inst, SolverConfig cfg, const CheckTolerances& tol = {}) {
  cfg.record_stationarity = true;
  const SolveResult res = solve(inst, cfg);
  CheckReport rep;
  rep.items.push_back({"solver_status",
                       res.trace.status == SolveStatus::numerical_failure ? CheckItem::Outcome::fail
                                                                          : CheckItem::Outcome::note,
                       to_string(res.trace.status) + " after " + std::to_string(res.trace.iterations()) +
                           " iterations" + (res.trace.message.empty() ? "" : " (" + res.trace.message + ")")});
  check_detail::Series s;
  s.variant = cfg.variant;
  s.p = cfg.p;
  for (const auto& r : res.trace.records) {
    s.epsilon.push_back(r.epsilon);
    s.g.push_back(r.g_eps_p);
    s.rel_error.push_back(r.rel_error.value_or(std::numeric_limits<double>::quiet_NaN()));
    s.feasibility.push_back(r.feasibility);
    s.stationarity.push_back(r.stationarity);
    s.floor.push_back(r.stationarity_floor);
  }
  if (s.epsilon.empty()) return rep;

  double worst = 0.0;
  for (double f : s.feasibility) worst = std::max(worst, f);
  rep.items.push_back({"feasibility", worst <= tol.feasibility ? CheckItem::Outcome::pass : CheckItem::Outcome::fail,
                       "max relative residual " + check_detail::sci(worst)});
  check_detail::add_monotone(rep, "epsilon_monotone", s.epsilon, 0.0);
  check_detail::add_monotone(rep, "objective_monotone", s.g, tol.objective_slack);

  if (std::isnan(s.stationarity.front())) {
    rep.items.push_back({"stationarity", CheckItem::Outcome::note, "null space too large to project; not checked"});
  } else {
    int above_plain = 0;
    std::optional<std::size_t> bad;
    double worst_s = 0.0;
    for (std::size_t n = 0; n < s.stationarity.size(); ++n) {
      worst_s = std::max(worst_s, s.stationarity[n]);
      if (s.stationarity[n] > tol.stationarity) {
        ++above_plain;
        if (!bad && s.stationarity[n] > tol.rounding_factor * s.floor[n]) bad = n;
      }
    }
    std::string detail = "max residual " + check_detail::sci(worst_s) + "; " + std::to_string(above_plain) +
                         " step(s) above " + check_detail::sci(tol.stationarity);
    if (bad) {
      detail += "; iteration " + std::to_string(*bad + 1) + " residual " + check_detail::sci(s.stationarity[*bad]) +
                " exceeds the rounding floor " + check_detail::sci(s.floor[*bad]);
    } else if (above_plain > 0) {
      detail += ", each within " + check_detail::sci(tol.rounding_factor) + " rounding floors";
    }
    rep.items.push_back({"stationarity", bad ? CheckItem::Outcome::fail : CheckItem::Outcome::pass, detail});
  }
  check_detail::add_order(rep, s, tol);
  return rep;
}

}  // namespace hmirls::experiments
