#pragma once

// A small hard completion instance: the rank-1 matrix u v^T with
// u = (1, 10, -2, 0.1), v = (1, 2, 3, 4), observed on seven cells. The
// third column holds a single sample, and seven is exactly the number of
// degrees of freedom of a 4x4 rank-1 matrix.

#include "hmirls/measurements.hpp"

namespace hmirls {

inline ProblemInstance worked_example_instance() {
  Vector u(4), v(4);
  u << 1.0, 10.0, -2.0, 0.1;
  v << 1.0, 2.0, 3.0, 4.0;
  Matrix X0 = u * v.transpose();
  // (2,1), (4,1), (3,2), (4,2), (4,3), (1,4), (2,4) in 1-based indices
  std::vector<Entry> cells{{1, 0}, {3, 0}, {2, 1}, {3, 1}, {3, 2}, {0, 3}, {1, 3}};
  MeasurementOperator op = MeasurementOperator::completion(4, 4, std::move(cells));
  Vector y = apply(op, X0);
  return ProblemInstance{4, 4, 1, std::move(op), std::move(y), std::move(X0), std::nullopt};
}

}  // namespace hmirls
