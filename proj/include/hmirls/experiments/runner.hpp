#pragma once

// Convergence studies and phase-transition sweeps on random completion
// instances, plus the alternative starting points used to probe robustness.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "hmirls/experiments/config.hpp"
#include "hmirls/experiments/csv.hpp"
#include "hmirls/experiments/svg.hpp"
#include "hmirls/measurements.hpp"
#include "hmirls/problem_io.hpp"
#include "hmirls/random.hpp"
#include "hmirls/solver.hpp"

namespace hmirls::experiments {

// ---------------------------------------------------------------------------
// starting points

/// Starting point selection. `default_start` keeps W_0 = I.
struct InitSpec {
  enum class Kind { default_start, random, file, orthogonal } kind = Kind::default_start;
  std::uint64_t seed = 0;
  std::string path;
};

/// Parses "default", "random:<seed>", "file:<path>" or "orthogonal:<seed>".
inline InitSpec parse_init(const std::string& s) {
  auto seed_of = [&](const std::string& tail) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(tail, &used);
      if (used != tail.size() || tail.empty() || tail[0] == '-') throw std::invalid_argument(tail);
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ParameterError("--init: bad seed '" + tail + "'");
    }
  };
  InitSpec spec;
  if (s == "default") return spec;
  if (s.rfind("random:", 0) == 0) {
    spec.kind = InitSpec::Kind::random;
    spec.seed = seed_of(s.substr(7));
  } else if (s.rfind("orthogonal:", 0) == 0) {
    spec.kind = InitSpec::Kind::orthogonal;
    spec.seed = seed_of(s.substr(11));
  } else if (s.rfind("file:", 0) == 0 && s.size() > 5) {
    spec.kind = InitSpec::Kind::file;
    spec.path = s.substr(5);
  } else {
    throw ParameterError("--init: expected default, random:<seed>, file:<path> or orthogonal:<seed>");
  }
  return spec;
}

/// Gaussian matrix projected onto the orthogonal complements of the column
/// and row spaces of X0: (I - P_U) G (I - P_V) with P_U, P_V the projectors
/// onto the leading r singular subspaces.
inline Matrix orthogonal_complement_start(const Matrix& X0, Index r, std::uint64_t seed) {
  const Index d = std::min(X0.rows(), X0.cols());
  if (r < 1 || r >= d) throw ParameterError("orthogonal_complement_start: r must lie in [1, min(d1,d2))");
  const SvdFactors f = svd(X0);
  const Matrix Ur = f.U.leftCols(r), Vr = f.V.leftCols(r);
  Rng rng = make_rng(seed);
  const Matrix G = gaussian_matrix(X0.rows(), X0.cols(), rng);
  const Matrix PU = Matrix::Identity(X0.rows(), X0.rows()) - Ur * Ur.transpose();
  const Matrix PV = Matrix::Identity(X0.cols(), X0.cols()) - Vr * Vr.transpose();
  return PU * G * PV;
}

/// The initial iterate requested by `spec` for `inst`, or nothing for the default.
inline std::optional<Matrix> resolve_init(const InitSpec& spec, const ProblemInstance& inst) {
  switch (spec.kind) {
    case InitSpec::Kind::default_start: return std::nullopt;
    case InitSpec::Kind::random: {
      Rng rng = make_rng(spec.seed);
      return gaussian_matrix(inst.d1, inst.d2, rng);
    }
    case InitSpec::Kind::file: {
      Matrix M = read_matrix(spec.path);
      if (M.rows() != inst.d1 || M.cols() != inst.d2) throw ParameterError("--init file: shape does not match problem");
      return M;
    }
    case InitSpec::Kind::orthogonal: {
      if (!inst.ground_truth || !inst.rank) {
        throw ParameterError("--init orthogonal: needs a problem with ground truth and rank");
      }
      return orthogonal_complement_start(*inst.ground_truth, *inst.rank, spec.seed);
    }
  }
  return std::nullopt;
}

inline SolverConfig solver_config_for(const ExperimentConfig& c, Variant variant, double p) {
  SolverConfig s;
  s.p = p;
  s.rank_estimate = c.r;
  s.variant = variant;
  s.tol_rel_change = c.tol_rel_change;
  s.max_iters = c.max_iters;
  s.success_tol = c.success_tol;
  // sweeps read only errors and statuses
  s.record_stationarity = false;
  return s;
}

// ---------------------------------------------------------------------------
// convergence study

struct Curve {
  Variant variant = Variant::HM;
  double p = 1.0;
  SolveTrace trace;
  std::string error;  // set when the solve could not start
};

struct ConvergenceResult {
  ProblemInstance instance;
  std::vector<Curve> curves;
};

/// Every variant x p pair solved on the same instance, drawn from base_seed.
inline ConvergenceResult run_convergence(const ExperimentConfig& c, const InitSpec& init = {}) {
  c.validate();
  ConvergenceResult out;
  out.instance =
      generate_completion_instance(c.d1, c.d2, c.r, measurements_for(c.rho, c.d1, c.d2, c.r), c.base_seed);
  const std::optional<Matrix> start = resolve_init(init, out.instance);
  for (Variant v : c.variants)
    for (double p : c.p_values) {
      Curve curve{v, p, {}, {}};
      SolverConfig s = solver_config_for(c, v, p);
      s.initial_iterate = start;
      try {
        curve.trace = solve(out.instance, s).trace;
      } catch (const std::exception& ex) {
        curve.error = ex.what();
        curve.trace.status = SolveStatus::numerical_failure;
        curve.trace.message = ex.what();
      }
      out.curves.push_back(std::move(curve));
    }
  return out;
}

inline std::string convergence_csv(const ConvergenceResult& r) {
  CsvWriter csv(trace_columns());
  for (const auto& c : r.curves) append_trace_rows(csv, to_string(c.variant), c.p, c.trace);
  return csv.str();
}

inline std::string curve_label(Variant v, double p) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s p=%g", to_string(v).c_str(), p);
  return buf;
}

inline std::string convergence_svg(const ConvergenceResult& r, const ExperimentConfig& c) {
  std::vector<Series> series;
  for (const auto& cv : r.curves) {
    Series s{curve_label(cv.variant, cv.p), {}, {}};
    for (const auto& rec : cv.trace.records) {
      s.x.push_back(rec.n);
      s.y.push_back(rec.rel_error.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    series.push_back(std::move(s));
  }
  char title[128];
  std::snprintf(title, sizeof title, "Relative error, %lldx%lld rank %lld, rho=%g", static_cast<long long>(c.d1),
                static_cast<long long>(c.d2), static_cast<long long>(c.r), c.rho);
  ChartSpec spec{title, "iteration n", "||X_n - X_0||_F / ||X_0||_F", true};
  return line_chart_svg(series, spec);
}

// ---------------------------------------------------------------------------
// phase-transition sweep

struct PhaseCellResult {
  double rho = 0.0;
  Index m = 0;
  Variant variant = Variant::HM;
  double p = 1.0;
  int trial = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  bool success = false;
  SolveStatus status = SolveStatus::numerical_failure;
  double seconds = 0.0;
};

inline std::uint64_t phase_seed(std::uint64_t base, std::size_t rho_index, int trial) {
  return derive_seed(base, rho_index, static_cast<std::uint64_t>(trial));
}

using PhaseObserver = std::function<void(const PhaseCellResult&, const SolveTrace&)>;

/// All (rho, trial, variant, p) cells. Trials run on a pool of `threads`
/// workers; the result is sorted by (rho, trial, variant, p) so it does not
/// depend on scheduling. `progress` is called after each finished trial.
/// `observe`, when set, sees every solved cell with its full trace (stationarity
/// included); calls are serialized but arrive in completion order.
inline std::vector<PhaseCellResult> run_phase(const ExperimentConfig& c,
                                              const std::function<void(std::size_t, std::size_t)>& progress = {},
                                              const PhaseObserver& observe = {}) {
  c.validate();
  struct Job {
    std::size_t rho_index;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < c.rho_values.size(); ++k)
    for (int t = 0; t < c.trials; ++t) jobs.push_back({k, t});

  std::vector<std::vector<PhaseCellResult>> per_job(jobs.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job job = jobs[j];
      const double rho = c.rho_values[job.rho_index];
      const Index m = measurements_for(rho, c.d1, c.d2, c.r);
      const std::uint64_t seed = phase_seed(c.base_seed, job.rho_index, job.trial);
      std::optional<ProblemInstance> inst;
      try {
        inst = generate_completion_instance(c.d1, c.d2, c.r, m, seed);
      } catch (const NumericalFailure&) {
        // no admissible mask within the resampling budget: every cell fails
      }
      for (Variant v : c.variants)
        for (double p : c.p_values) {
          PhaseCellResult cell;
          cell.rho = rho;
          cell.m = m;
          cell.variant = v;
          cell.p = p;
          cell.trial = job.trial;
          cell.seed = seed;
          std::optional<SolveResult> res;
          if (inst) {
            SolverConfig sc = solver_config_for(c, v, p);
            sc.record_stationarity = static_cast<bool>(observe);
            res = solve(*inst, sc);
            cell.iterations = res->trace.iterations();
            if (!res->trace.records.empty()) cell.rel_error = *res->trace.records.back().rel_error;
            cell.status = res->trace.status;
            cell.seconds = res->trace.seconds;
          }
          cell.success = cell.rel_error < c.success_tol;
          if (observe && res) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            observe(cell, res->trace);
          }
          per_job[j].push_back(cell);
        }
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(finished, jobs.size());
      }
    }
  };

  unsigned n_threads = c.threads > 0 ? static_cast<unsigned>(c.threads) : std::thread::hardware_concurrency();
  n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<PhaseCellResult> cells;
  for (auto& v : per_job) cells.insert(cells.end(), v.begin(), v.end());
  std::stable_sort(cells.begin(), cells.end(), [](const PhaseCellResult& a, const PhaseCellResult& b) {
    return std::make_tuple(a.rho, a.trial, to_string(a.variant), a.p) <
           std::make_tuple(b.rho, b.trial, to_string(b.variant), b.p);
  });
  return cells;
}

/// Per-cell table without wall times, so equal inputs give equal bytes.
inline std::string phase_csv(const std::vector<PhaseCellResult>& cells) {
  CsvWriter csv({"rho", "m", "variant", "p", "trial", "seed", "iterations", "rel_error", "success", "status"});
  for (const auto& c : cells) {
    csv.row({csv_number(c.rho), std::to_string(c.m), to_string(c.variant), csv_number(c.p), std::to_string(c.trial),
             std::to_string(c.seed), std::to_string(c.iterations), csv_number(c.rel_error), c.success ? "1" : "0",
             to_string(c.status)});
  }
  return csv.str();
}

inline std::string phase_timing_csv(const std::vector<PhaseCellResult>& cells) {
  CsvWriter csv({"rho", "variant", "p", "trial", "seconds"});
  for (const auto& c : cells) {
    csv.row({csv_number(c.rho), to_string(c.variant), csv_number(c.p), std::to_string(c.trial), csv_number(c.seconds)});
  }
  return csv.str();
}

struct SuccessRate {
  double rho = 0.0;
  Variant variant = Variant::HM;
  double p = 1.0;
  int successes = 0;
  int trials = 0;
  double rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
};

/// Success counts per (rho, variant, p), in the canonical cell order.
inline std::vector<SuccessRate> success_rates(const std::vector<PhaseCellResult>& cells) {
  std::vector<SuccessRate> out;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SuccessRate& s) {
      return s.rho == c.rho && s.variant == c.variant && s.p == c.p;
    });
    if (it == out.end()) {
      out.push_back({c.rho, c.variant, c.p, 0, 0});
      it = std::prev(out.end());
    }
    ++it->trials;
    if (c.success) ++it->successes;
  }
  return out;
}

inline std::string phase_summary_csv(const std::vector<SuccessRate>& rates) {
  CsvWriter csv({"rho", "variant", "p", "successes", "trials", "success_rate"});
  for (const auto& s : rates) {
    csv.row({csv_number(s.rho), to_string(s.variant), csv_number(s.p), std::to_string(s.successes),
             std::to_string(s.trials), csv_number(s.rate())});
  }
  return csv.str();
}

inline std::string phase_svg(const std::vector<SuccessRate>& rates, const ExperimentConfig& c) {
  std::vector<Series> series;
  for (Variant v : c.variants)
    for (double p : c.p_values) {
      Series s{curve_label(v, p), {}, {}};
      for (const auto& r : rates) {
        if (r.variant == v && r.p == p) {
          s.x.push_back(r.rho);
          s.y.push_back(r.rate());
        }
      }
      series.push_back(std::move(s));
    }
  char title[128];
  std::snprintf(title, sizeof title, "Success rate, %lldx%lld rank %lld, %d trials", static_cast<long long>(c.d1),
                static_cast<long long>(c.d2), static_cast<long long>(c.r), c.trials);
  ChartSpec spec{title, "oversampling factor rho", "success rate", false, 0.0, 1.0};
  return line_chart_svg(series, spec);
}

}  // namespace hmirls::experiments
