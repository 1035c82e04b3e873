#pragma once

#include <stdexcept>
#include <string>

namespace hmirls {

/// Invalid argument, shape or configuration supplied by the caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A coefficient denominator or rank-dependent quantity vanished.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or linear solve failed to produce a trustworthy result.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// Malformed input file; names the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& field, const std::string& detail)
      : std::runtime_error("field '" + field + "': " + detail), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace hmirls
