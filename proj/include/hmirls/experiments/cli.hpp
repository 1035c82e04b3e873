#pragma once

// Command-line front end: gen | solve | conv | phase | check.
//
// Exit codes: 0 ok, 1 usage or input error, 2 solver numerical failure,
// 3 failed check, 4 solve stopped at max_iters.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmirls/experiments/check.hpp"
#include "hmirls/experiments/config.hpp"
#include "hmirls/experiments/csv.hpp"
#include "hmirls/experiments/runner.hpp"
#include "hmirls/problem_io.hpp"
#include "hmirls/solver.hpp"

namespace hmirls::experiments {

enum ExitCode : int { kOk = 0, kUsage = 1, kSolverFailure = 2, kCheckFailure = 3, kMaxIters = 4 };

namespace cli_detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ParameterError("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Solver flags shared by solve and check.
struct SolveFlags {
  std::string variant = "HM";
  double p = 0.5;
  std::optional<Index> rank;
  double tol = 1e-10;
  int max_iters = 3000;
  double success_tol = 1e-3;
  double eps_floor = 0.0;
  std::string backend = "auto";
  std::string init = "default";

  void add(CLI::App* app) {
    app->add_option("--variant", variant, "Reweighting law: HM, AM, COL or ROW")->capture_default_str();
    app->add_option("--p", p, "Schatten exponent in (0, 1]")->capture_default_str();
    app->add_option("--rank", rank, "Rank estimate (default: the problem's rank)");
    app->add_option("--tol", tol, "Stop when the relative change drops below this")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Iteration cap")->capture_default_str();
    app->add_option("--success-tol", success_tol, "Relative error counted as recovery")->capture_default_str();
    app->add_option("--eps-floor", eps_floor, "Lower bound for the smoothing parameter")->capture_default_str();
    app->add_option("--backend", backend, "Gram solver: auto, cholesky or cg")->capture_default_str();
    app->add_option("--init", init, "Start: default, random:<seed>, file:<path> or orthogonal:<seed>")
        ->capture_default_str();
  }

  SolverConfig config(const ProblemInstance& inst) const {
    SolverConfig c;
    c.variant = parse_variant(variant);
    c.p = p;
    if (rank) {
      c.rank_estimate = *rank;
    } else if (inst.rank) {
      c.rank_estimate = *inst.rank;
    } else {
      throw ParameterError("problem has no rank; pass --rank");
    }
    c.tol_rel_change = tol;
    c.max_iters = max_iters;
    c.success_tol = success_tol;
    c.epsilon_floor = eps_floor;
    if (backend == "auto") {
      c.gram_backend = GramBackend::automatic;
    } else if (backend == "cholesky") {
      c.gram_backend = GramBackend::dense_cholesky;
    } else if (backend == "cg") {
      c.gram_backend = GramBackend::conjugate_gradient;
    } else {
      throw ParameterError("--backend must be auto, cholesky or cg");
    }
    c.initial_iterate = resolve_init(parse_init(init), inst);
    c.validate();
    return c;
  }
};

// Experiment flags; each one given on the command line overrides the config file.
struct ExperimentFlags {
  std::string config_path;
  Index d1 = 0, d2 = 0, r = 0;
  std::vector<double> p_values;
  std::vector<std::string> variants;
  std::vector<double> rho_values;
  double rho = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  double tol = 0, success_tol = 0;
  int max_iters = 0, threads = 0;
  std::string out_dir;
  std::string init = "default";
  CLI::App* app = nullptr;

  void add(CLI::App* a, bool phase) {
    app = a;
    a->add_option("--config", config_path, "JSON experiment config");
    a->add_option("--d1", d1, "Rows");
    a->add_option("--d2", d2, "Columns");
    a->add_option("--r", r, "Rank of the ground truth (also the rank estimate)");
    a->add_option("--p", p_values, "Schatten exponents");
    a->add_option("--variants", variants, "Reweighting laws")->expected(0, -1);
    if (phase) {
      a->add_option("--rho-values", rho_values, "Oversampling factors");
      a->add_option("--trials", trials, "Instances per oversampling factor");
      a->add_option("--threads", threads, "Worker threads (0: all cores)");
    } else {
      a->add_option("--rho", rho, "Oversampling factor");
      a->add_option("--init", init, "Start: default, random:<seed>, file:<path> or orthogonal:<seed>");
    }
    a->add_option("--seed", seed, "Base seed");
    a->add_option("--tol", tol, "Relative-change stopping tolerance");
    a->add_option("--max-iters", max_iters, "Iteration cap");
    a->add_option("--success-tol", success_tol, "Relative error counted as recovery");
    a->add_option("--out-dir", out_dir, "Output directory");
  }

  bool given(const char* name) const {
    const CLI::Option* o = app->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  }

  ExperimentConfig resolve(Kind kind) const {
    ExperimentConfig c;
    c.kind = kind;
    if (kind == Kind::phase) c.trials = 20;
    if (!config_path.empty()) {
      c = read_config(config_path, c);
      if (c.kind != kind) throw ParameterError("config kind '" + to_string(c.kind) + "' does not match this command");
    }
    if (given("--d1")) c.d1 = d1;
    if (given("--d2")) c.d2 = d2;
    if (given("--r")) c.r = r;
    if (given("--p")) c.p_values = p_values;
    if (given("--variants")) {
      c.variants.clear();
      for (const auto& v : variants) c.variants.push_back(parse_variant(v));
    }
    if (given("--rho-values")) c.rho_values = rho_values;
    if (given("--rho")) c.rho = rho;
    if (given("--trials")) c.trials = trials;
    if (given("--threads")) c.threads = threads;
    if (given("--seed")) c.base_seed = seed;
    if (given("--tol")) c.tol_rel_change = tol;
    if (given("--max-iters")) c.max_iters = max_iters;
    if (given("--success-tol")) c.success_tol = success_tol;
    if (given("--out-dir")) c.output_dir = out_dir;
    c.validate();
    return c;
  }
};

inline int exit_code_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return kOk;
    case SolveStatus::max_iters: return kMaxIters;
    case SolveStatus::numerical_failure: return kSolverFailure;
  }
  return kSolverFailure;
}

}  // namespace cli_detail

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Low-rank matrix recovery by iteratively reweighted least squares", "hmirls"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a random problem file");
  Index g_d1 = 0, g_d2 = 0, g_r = 0, g_m = 0;
  double g_rho = 0;
  std::uint64_t g_seed = 0;
  std::string g_out, g_kind = "completion";
  gen->add_option("--d1", g_d1, "Rows")->required();
  gen->add_option("--d2", g_d2, "Columns")->required();
  gen->add_option("--r", g_r, "Rank")->required();
  auto* g_rho_opt = gen->add_option("--rho", g_rho, "Oversampling factor: m = floor(rho * r(d1 + d2 - r))");
  auto* g_m_opt = gen->add_option("--m", g_m, "Number of measurements");
  g_rho_opt->excludes(g_m_opt);
  gen->add_option("--seed", g_seed, "Seed")->required();
  gen->add_option("--operator", g_kind, "completion or gaussian")->capture_default_str();
  gen->add_option("--out", g_out, "Output problem file")->required();

  // solve
  auto* sol = app.add_subcommand("solve", "Solve a problem file");
  std::string s_problem, s_trace, s_out;
  cli_detail::SolveFlags s_flags;
  sol->add_option("problem", s_problem, "Problem file")->required();
  s_flags.add(sol);
  sol->add_option("--trace", s_trace, "Per-iteration CSV output");
  sol->add_option("--out", s_out, "Recovered matrix output");

  // conv / phase
  auto* conv = app.add_subcommand("conv", "Convergence study on one instance");
  cli_detail::ExperimentFlags c_flags;
  c_flags.add(conv, false);
  auto* phase = app.add_subcommand("phase", "Phase-transition sweep");
  cli_detail::ExperimentFlags p_flags;
  p_flags.add(phase, true);

  // check
  auto* chk = app.add_subcommand("check", "Check solver invariants on a trace or a fresh run");
  std::string k_problem, k_trace, k_json;
  cli_detail::SolveFlags k_flags;
  chk->add_option("problem", k_problem, "Problem file")->required();
  chk->add_option("--trace", k_trace, "Trace CSV written by solve (omit to re-run the solver)");
  chk->add_option("--json", k_json, "Machine-readable report output");
  k_flags.add(chk);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      Index m = 0;
      if (*g_m_opt) {
        m = g_m;
      } else if (*g_rho_opt) {
        m = measurements_for(g_rho, g_d1, g_d2, g_r);
      } else {
        throw ParameterError("gen: pass --rho or --m");
      }
      ProblemInstance inst;
      if (g_kind == "completion") {
        inst = generate_completion_instance(g_d1, g_d2, g_r, m, g_seed);
      } else if (g_kind == "gaussian") {
        Rng rng = make_rng(g_seed);
        Matrix X0 = sample_ground_truth(g_d1, g_d2, g_r, rng);
        MeasurementOperator op = sample_gaussian_operator(g_d1, g_d2, m, rng);
        inst = ProblemInstance{g_d1, g_d2, g_r, op, apply(op, X0), std::move(X0), g_seed};
      } else {
        throw ParameterError("gen: --operator must be completion or gaussian");
      }
      write_problem(g_out, inst);
      out << "wrote " << g_out << " (" << g_d1 << "x" << g_d2 << ", rank " << g_r << ", m = " << m << ")\n";
      return kOk;
    }

    if (*sol) {
      const ProblemInstance inst = read_problem(s_problem);
      const SolverConfig cfg = s_flags.config(inst);
      const SolveResult res = solve(inst, cfg);
      if (!s_trace.empty()) io_detail::spit(s_trace, trace_csv(cfg.variant, cfg.p, res.trace));
      if (!s_out.empty()) write_matrix(s_out, res.X);
      const auto& t = res.trace;
      out << "status=" << to_string(t.status) << " iterations=" << t.iterations();
      if (!t.records.empty() && t.records.back().rel_error) {
        const double e = *t.records.back().rel_error;
        out << " rel_error=" << csv_number(e) << " success=" << (e < cfg.success_tol ? 1 : 0);
      }
      out << " seconds=" << t.seconds << "\n";
      if (!t.message.empty()) err << t.message << "\n";
      return cli_detail::exit_code_for(t.status);
    }

    if (*conv) {
      const ExperimentConfig c = c_flags.resolve(Kind::convergence);
      const ConvergenceResult r = run_convergence(c, parse_init(c_flags.init));
      cli_detail::ensure_dir(c.output_dir);
      write_problem(cli_detail::join(c.output_dir, "problem.json"), r.instance);
      io_detail::spit(cli_detail::join(c.output_dir, "convergence.csv"), convergence_csv(r));
      io_detail::spit(cli_detail::join(c.output_dir, "convergence.svg"), convergence_svg(r, c));
      for (const auto& cv : r.curves) {
        out << curve_label(cv.variant, cv.p) << ": " << to_string(cv.trace.status) << " after "
            << cv.trace.iterations() << " iterations";
        if (!cv.trace.records.empty() && cv.trace.records.back().rel_error) {
          out << ", rel_error " << csv_number(*cv.trace.records.back().rel_error);
        }
        if (!cv.trace.message.empty()) out << " (" << cv.trace.message << ")";
        out << "\n";
      }
      return kOk;
    }

    if (*phase) {
      const ExperimentConfig c = p_flags.resolve(Kind::phase);
      const auto cells = run_phase(c, [&](std::size_t done, std::size_t total) {
        err << "\rtrials " << done << "/" << total << std::flush;
        if (done == total) err << "\n";
      });
      const auto rates = success_rates(cells);
      cli_detail::ensure_dir(c.output_dir);
      io_detail::spit(cli_detail::join(c.output_dir, "phase.csv"), phase_csv(cells));
      io_detail::spit(cli_detail::join(c.output_dir, "phase_summary.csv"), phase_summary_csv(rates));
      io_detail::spit(cli_detail::join(c.output_dir, "phase_timing.csv"), phase_timing_csv(cells));
      io_detail::spit(cli_detail::join(c.output_dir, "phase.svg"), phase_svg(rates, c));
      for (const auto& s : rates) {
        out << "rho=" << csv_number(s.rho) << " " << curve_label(s.variant, s.p) << ": " << s.successes << "/"
            << s.trials << "\n";
      }
      return kOk;
    }

    if (*chk) {
      const ProblemInstance inst = read_problem(k_problem);
      CheckReport rep;
      if (!k_trace.empty()) {
        rep = check_trace(inst, parse_trace_csv(io_detail::slurp(k_trace)));
      } else {
        rep = check_run(inst, k_flags.config(inst));
      }
      out << rep.text();
      if (!k_json.empty()) io_detail::spit(k_json, rep.json());
      return rep.ok() ? kOk : kCheckFailure;
    }
  } catch (const ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const ParameterError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const NumericalFailure& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kSolverFailure;
  } catch (const SingularityError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}

}  // namespace hmirls::experiments
