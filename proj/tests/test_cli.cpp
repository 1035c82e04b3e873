#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hmirls/experiments/cli.hpp"
#include "hmirls/problem_io.hpp"
#include "hmirls/worked_example.hpp"
#include "test_support.hpp"

using namespace hmirls;
using namespace hmirls::experiments;
using hmirls::testing::read_text;
using hmirls::testing::TempDir;
using hmirls::testing::write_text;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "hmirls");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

bool exists(const std::string& p) { return std::filesystem::exists(p); }

}  // namespace

TEST(CliGen, SmallCompletionProblemIsDeterministic) {
  TempDir dir("gen");
  const std::string a = dir.file("a.json"), b = dir.file("b.json");
  ASSERT_EQ(run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--m", "7", "--seed", "3", "--out", a}).code, 0);
  ASSERT_EQ(run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--m", "7", "--seed", "3", "--out", b}).code, 0);
  EXPECT_EQ(read_text(a), read_text(b));
  const ProblemInstance inst = read_problem(a);
  EXPECT_EQ(inst.op.m(), 7);
  std::set<std::pair<Index, Index>> cells;
  for (const auto& e : inst.op.entries()) cells.emplace(e.row, e.col);
  EXPECT_EQ(cells.size(), 7u);
  EXPECT_EQ(inst.seed, std::optional<std::uint64_t>(3));
  EXPECT_TRUE(inst.ground_truth.has_value());
}

TEST(CliGen, OversamplingFactorSetsMeasurementCount) {
  TempDir dir("gen");
  const CliRun r = run({"gen", "--d1", "100", "--d2", "100", "--r", "8", "--rho", "2.6", "--seed", "1", "--out",
                     dir.file("p.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("m = 3993"), std::string::npos) << r.out;
  EXPECT_EQ(read_problem(dir.file("p.json")).op.m(), 3993);
}

TEST(CliGen, GaussianOperator) {
  TempDir dir("gen");
  ASSERT_EQ(run({"gen", "--d1", "5", "--d2", "4", "--r", "1", "--m", "12", "--seed", "2", "--operator", "gaussian",
                 "--out", dir.file("g.json")})
                .code,
            0);
  const ProblemInstance inst = read_problem(dir.file("g.json"));
  EXPECT_FALSE(inst.op.is_completion());
  EXPECT_EQ(inst.op.m(), 12);
}

TEST(CliGen, UsageErrors) {
  TempDir dir("gen");
  const std::string out = dir.file("x.json");
  EXPECT_EQ(run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--seed", "3", "--out", out}).code, 1);
  EXPECT_EQ(run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--m", "3", "--seed", "3", "--out", out}).code, 1);
  EXPECT_EQ(
      run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--m", "7", "--rho", "2", "--seed", "3", "--out", out}).code,
      1);
  EXPECT_EQ(run({"gen", "--d1", "4", "--d2", "4", "--r", "1", "--m", "7", "--seed", "3", "--operator", "sparse",
                 "--out", out})
                .code,
            1);
  EXPECT_EQ(run({"gen", "--d1", "4"}).code, 1);
  EXPECT_FALSE(exists(out));
}

TEST(CliTop, UsageAndHelp) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  const CliRun help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("solve"), std::string::npos);
}

TEST(CliSolve, WorkedExampleRecoversWithHarmonicMean) {
  TempDir dir("solve");
  write_problem(dir.file("ex.json"), worked_example_instance());
  const std::vector<std::string> args{"solve", dir.file("ex.json"), "--variant", "HM", "--p", "0.1",
                                      "--trace", dir.file("t1.csv"), "--out", dir.file("x.json")};
  const CliRun r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("status=converged"), std::string::npos) << r.out;
  const auto rows = parse_trace_csv(read_text(dir.file("t1.csv")));
  ASSERT_FALSE(rows.empty());
  EXPECT_LE(rows.back().rel_error, 1e-10);
  EXPECT_LE(relative_error(read_matrix(dir.file("x.json")), *worked_example_instance().ground_truth), 1e-10);

  auto again = args;
  again[7] = dir.file("t2.csv");
  ASSERT_EQ(run(again).code, 0);
  EXPECT_EQ(read_text(dir.file("t1.csv")), read_text(dir.file("t2.csv")));
}

TEST(CliSolve, IterationCapGivesItsOwnExitCode) {
  TempDir dir("solve");
  write_problem(dir.file("ex.json"), worked_example_instance());
  const CliRun r = run({"solve", dir.file("ex.json"), "--variant", "COL", "--p", "0.1", "--max-iters", "50"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("status=max_iters iterations=50"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("success=0"), std::string::npos) << r.out;
}

TEST(CliSolve, FullyObservedProblemTakesOneIteration) {
  TempDir dir("solve");
  ASSERT_EQ(run({"gen", "--d1", "3", "--d2", "3", "--r", "1", "--m", "9", "--seed", "1", "--out", dir.file("f.json")})
                .code,
            0);
  const CliRun r = run({"solve", dir.file("f.json"), "--variant", "am"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("iterations=1 "), std::string::npos) << r.out;
}

TEST(CliSolve, InputErrorsNameTheProblem) {
  TempDir dir("solve");
  write_text(dir.file("bad.json"), R"({"d1": 2, "d2": 2, "operator": {"kind": "completion", "rows": [1, 9],
    "cols": [1, 2]}, "y": [1.0, 2.0]})");
  const CliRun bad = run({"solve", dir.file("bad.json"), "--rank", "1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("operator.rows[1]"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"solve", dir.file("missing.json")}).code, 1);
  write_problem(dir.file("ex.json"), worked_example_instance());
  EXPECT_EQ(run({"solve", dir.file("ex.json"), "--variant", "XYZ"}).code, 1);
  EXPECT_EQ(run({"solve", dir.file("ex.json"), "--p", "1.5"}).code, 1);
  EXPECT_EQ(run({"solve", dir.file("ex.json"), "--backend", "lu"}).code, 1);
  EXPECT_EQ(run({"solve", dir.file("ex.json"), "--init", "zeros"}).code, 1);
  ProblemInstance norank = worked_example_instance();
  norank.rank.reset();
  write_problem(dir.file("norank.json"), norank);
  const CliRun nr = run({"solve", dir.file("norank.json")});
  EXPECT_EQ(nr.code, 1);
  EXPECT_NE(nr.err.find("--rank"), std::string::npos);
  EXPECT_EQ(run({"solve", dir.file("norank.json"), "--rank", "1", "--p", "0.1"}).code, 0);
}

TEST(CliSolve, ExitCodeMapping) {
  EXPECT_EQ(cli_detail::exit_code_for(SolveStatus::converged), 0);
  EXPECT_EQ(cli_detail::exit_code_for(SolveStatus::numerical_failure), 2);
  EXPECT_EQ(cli_detail::exit_code_for(SolveStatus::max_iters), 4);
}

TEST(CliConv, WritesDeterministicArtifacts) {
  TempDir dir("conv");
  const std::string a = dir.file("a"), b = dir.file("b");
  const std::vector<std::string> base{"conv", "--d1", "12", "--d2", "12", "--r", "2", "--rho", "2",
                                      "--p", "0.5", "0.8", "--variants", "HM", "COL", "--max-iters", "200"};
  auto with = [&](const std::string& out) {
    auto v = base;
    v.insert(v.end(), {"--out-dir", out});
    return v;
  };
  const CliRun r = run(with(a));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("HM p=0.5: converged"), std::string::npos) << r.out;
  for (const char* f : {"problem.json", "convergence.csv", "convergence.svg"}) EXPECT_TRUE(exists(a + "/" + f)) << f;
  ASSERT_EQ(run(with(b)).code, 0);
  for (const char* f : {"problem.json", "convergence.csv", "convergence.svg"}) {
    EXPECT_EQ(read_text(a + "/" + f), read_text(b + "/" + f)) << f;
  }
}

TEST(CliConv, ConfigFileAndOverrides) {
  TempDir dir("conv");
  write_text(dir.file("c.json"), R"({"kind": "convergence", "d1": 10, "d2": 10, "r": 2, "rho": 2.0,
    "variants": ["HM"], "p_values": [0.5], "max_iters": 100})");
  const CliRun r = run({"conv", "--config", dir.file("c.json"), "--p", "0.8", "--out-dir", dir.file("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("HM p=0.8"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("HM p=0.5"), std::string::npos) << r.out;
  write_text(dir.file("typo.json"), R"({"kind": "convergence", "variant": ["HM"]})");
  EXPECT_EQ(run({"conv", "--config", dir.file("typo.json")}).code, 1);
  write_text(dir.file("phase.json"), R"({"kind": "phase"})");
  EXPECT_EQ(run({"conv", "--config", dir.file("phase.json")}).code, 1);
  EXPECT_EQ(run({"conv", "--variants", "--out-dir", dir.file("o")}).code, 1);
}

TEST(CliPhase, OutputsDoNotDependOnThreadCount) {
  TempDir dir("phase");
  auto args = [&](const std::string& out, const std::string& threads) {
    return std::vector<std::string>{"phase", "--d1", "10", "--d2", "10", "--r", "2", "--rho-values", "1.5", "2.5",
                                    "--trials", "3", "--variants", "HM", "COL", "--p", "0.5", "--max-iters", "300",
                                    "--threads", threads, "--out-dir", out};
  };
  const CliRun one = run(args(dir.file("one"), "1"));
  ASSERT_EQ(one.code, 0) << one.err;
  ASSERT_EQ(run(args(dir.file("two"), "2")).code, 0);
  for (const char* f : {"phase.csv", "phase_summary.csv", "phase.svg"}) {
    EXPECT_EQ(read_text(dir.file("one") + "/" + f), read_text(dir.file("two") + "/" + f)) << f;
  }
  EXPECT_TRUE(exists(dir.file("one") + "/phase_timing.csv"));
  const std::string csv = read_text(dir.file("one") + "/phase.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3 * 2);
  EXPECT_NE(one.out.find("rho=1.5 HM p=0.5: "), std::string::npos) << one.out;
  EXPECT_EQ(run({"phase", "--d1", "10", "--d2", "10", "--r", "2", "--out-dir", dir.file("x")}).code, 1);
}

TEST(CliCheck, TraceAndRerunModes) {
  TempDir dir("check");
  ASSERT_EQ(run({"gen", "--d1", "20", "--d2", "20", "--r", "2", "--rho", "2", "--seed", "6", "--out", dir.file("p.json")})
                .code,
            0);
  ASSERT_EQ(run({"solve", dir.file("p.json"), "--trace", dir.file("t.csv")}).code, 0);
  const CliRun ok = run({"check", dir.file("p.json"), "--trace", dir.file("t.csv"), "--json", dir.file("r.json")});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_NE(ok.out.find("PASS  epsilon_monotone"), std::string::npos) << ok.out;
  EXPECT_NE(read_text(dir.file("r.json")).find("\"ok\": true"), std::string::npos);

  const CliRun rerun = run({"check", dir.file("p.json")});
  EXPECT_EQ(rerun.code, 0) << rerun.out;
  EXPECT_NE(rerun.out.find("stationarity"), std::string::npos);

  // double epsilon on the fourth row of the trace
  std::string text = read_text(dir.file("t.csv"));
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  ASSERT_GE(rows.size(), 6u);
  auto fields = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    return f;
  };
  auto f3 = fields(rows[3]), f4 = fields(rows[4]);
  f4[5] = csv_number(2.0 * std::stod(f3[5]));
  std::string corrupted;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k == 4) {
      for (std::size_t i = 0; i < f4.size(); ++i) corrupted += (i ? "," : "") + f4[i];
    } else {
      corrupted += rows[k];
    }
    corrupted += "\n";
  }
  write_text(dir.file("bad.csv"), corrupted);
  const CliRun bad = run({"check", dir.file("p.json"), "--trace", dir.file("bad.csv")});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.out.find("FAIL  epsilon_monotone"), std::string::npos) << bad.out;

  ASSERT_EQ(run({"gen", "--d1", "20", "--d2", "20", "--r", "2", "--rho", "2", "--seed", "7", "--out", dir.file("q.json")})
                .code,
            0);
  const CliRun mismatch = run({"check", dir.file("q.json"), "--trace", dir.file("t.csv")});
  EXPECT_EQ(mismatch.code, 1);
  EXPECT_NE(mismatch.err.find("does not match"), std::string::npos) << mismatch.err;
}
