// Recovers the 4x4 worked example with each reweighting law and prints the
// error trajectory of the harmonic-mean run.

#include <cstdio>

#include "hmirls/solver.hpp"
#include "hmirls/worked_example.hpp"

int main() {
  using namespace hmirls;
  const ProblemInstance inst = worked_example_instance();
  for (Variant v : {Variant::HM, Variant::AM, Variant::COL, Variant::ROW}) {
    SolverConfig cfg;
    cfg.p = 0.1;
    cfg.rank_estimate = 1;
    cfg.variant = v;
    cfg.max_iters = 2000;
    const SolveResult res = solve(inst, cfg);
    const auto& t = res.trace;
    std::printf("%-3s %-17s %5d iterations  relative error %.3e\n", to_string(v).c_str(),
                to_string(t.status).c_str(), t.iterations(), *t.records.back().rel_error);
    if (v == Variant::HM) {
      for (const auto& r : t.records) std::printf("    n=%2d  error %.3e  eps %.3e\n", r.n, *r.rel_error, r.epsilon);
    }
  }
  return 0;
}
