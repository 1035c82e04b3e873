#pragma once

// Problem and matrix files.
//
// A problem file is a JSON document with exactly these keys:
//
//   {
//     "d1": 4, "d2": 4, "rank": 1, "seed": 7,
//     "operator": {"kind": "completion", "rows": [2, 4], "cols": [1, 1]},
//     "y": [10.0, 0.1],
//     "ground_truth": [[...], ...]
//   }
//
// "rank", "seed" and "ground_truth" are optional. Completion indices are
// 1-based. A dense operator stores {"kind": "dense", "sensing": [[...], ...]}
// with one row per measurement acting on the column-stacked matrix. Matrices
// are row-major arrays of rows. Unknown keys are rejected.
//
// Numbers are written with 17 significant digits so every double survives a
// write/read cycle bit for bit; the writer is deterministic, so equal inputs
// give identical bytes.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hmirls/errors.hpp"
#include "hmirls/measurements.hpp"

namespace hmirls {

/// "%.17g" rendering; non-finite values have no JSON form.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw ParameterError("format_double: non-finite value cannot be serialized");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // keep a decimal marker so the value reads back as a float
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace io_detail {

inline void write_vector(std::ostream& os, const Vector& v) {
  os << '[';
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_double(v(i));
  os << ']';
}

inline void write_matrix_rows(std::ostream& os, const Matrix& M, const char* indent) {
  os << '[';
  for (Index i = 0; i < M.rows(); ++i) {
    os << (i ? ",\n" : "\n") << indent << "  [";
    for (Index j = 0; j < M.cols(); ++j) os << (j ? ", " : "") << format_double(M(i, j));
    os << ']';
  }
  os << '\n' << indent << ']';
}

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed,
                         std::initializer_list<const char*> required) {
  if (!obj.is_object()) throw ParseError(where.empty() ? "<root>" : where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ParseError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
  }
  for (const char* k : required) {
    if (!obj.contains(k)) throw ParseError(where.empty() ? k : where + "." + k, "missing required key");
  }
}

inline Index read_index(const json& v, const std::string& field, Index lo) {
  if (!v.is_number_integer()) throw ParseError(field, "expected an integer");
  const auto x = v.get<long long>();
  if (x < lo) throw ParseError(field, "must be >= " + std::to_string(lo));
  return static_cast<Index>(x);
}

inline double read_double(const json& v, const std::string& field) {
  if (!v.is_number()) throw ParseError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(field, "non-finite number");
  return x;
}

inline Vector read_vector(const json& v, const std::string& field) {
  if (!v.is_array()) throw ParseError(field, "expected an array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Index>(i)) = read_double(v[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Matrix read_matrix_rows(const json& v, const std::string& field, Index rows, Index cols) {
  if (!v.is_array()) throw ParseError(field, "expected an array of rows");
  if (static_cast<Index>(v.size()) != rows) {
    throw ParseError(field, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
  }
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const std::string rf = field + "[" + std::to_string(i) + "]";
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError(rf, "expected a row of " + std::to_string(cols) + " numbers");
    }
    for (Index j = 0; j < cols; ++j) {
      M(i, j) = read_double(row[static_cast<std::size_t>(j)], rf + "[" + std::to_string(j) + "]");
    }
  }
  return M;
}

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ParseError("<document>", std::string("invalid JSON: ") + ex.what());
  }
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParameterError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ParameterError("write to '" + path + "' failed");
}

}  // namespace io_detail

inline std::string problem_to_string(const ProblemInstance& inst) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"d1\": " << inst.d1 << ",\n";
  os << "  \"d2\": " << inst.d2 << ",\n";
  if (inst.rank) os << "  \"rank\": " << *inst.rank << ",\n";
  if (inst.seed) os << "  \"seed\": " << *inst.seed << ",\n";
  os << "  \"operator\": {\n";
  if (inst.op.is_completion()) {
    os << "    \"kind\": \"completion\",\n    \"rows\": [";
    const auto& e = inst.op.entries();
    for (std::size_t k = 0; k < e.size(); ++k) os << (k ? ", " : "") << e[k].row + 1;
    os << "],\n    \"cols\": [";
    for (std::size_t k = 0; k < e.size(); ++k) os << (k ? ", " : "") << e[k].col + 1;
    os << "]\n";
  } else {
    os << "    \"kind\": \"dense\",\n    \"sensing\": ";
    io_detail::write_matrix_rows(os, inst.op.sensing(), "    ");
    os << '\n';
  }
  os << "  },\n";
  os << "  \"y\": ";
  io_detail::write_vector(os, inst.y);
  if (inst.ground_truth) {
    os << ",\n  \"ground_truth\": ";
    io_detail::write_matrix_rows(os, *inst.ground_truth, "  ");
  }
  os << "\n}\n";
  return os.str();
}

inline ProblemInstance problem_from_string(const std::string& text) {
  using io_detail::json;
  const json doc = io_detail::parse_text(text);
  io_detail::require_keys(doc, "", {"d1", "d2", "rank", "seed", "operator", "y", "ground_truth"},
                          {"d1", "d2", "operator", "y"});
  ProblemInstance inst;
  inst.d1 = io_detail::read_index(doc["d1"], "d1", 1);
  inst.d2 = io_detail::read_index(doc["d2"], "d2", 1);
  if (doc.contains("rank")) inst.rank = io_detail::read_index(doc["rank"], "rank", 1);
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw ParseError("seed", "expected a non-negative integer");
    }
    inst.seed = s.get<std::uint64_t>();
  }

  const json& opj = doc["operator"];
  io_detail::require_keys(opj, "operator", {"kind", "rows", "cols", "sensing"}, {"kind"});
  if (!opj["kind"].is_string()) throw ParseError("operator.kind", "expected a string");
  const std::string kind = opj["kind"].get<std::string>();
  if (kind == "completion") {
    if (opj.contains("sensing")) throw ParseError("operator.sensing", "not allowed for a completion operator");
    if (!opj.contains("rows")) throw ParseError("operator.rows", "missing required key");
    if (!opj.contains("cols")) throw ParseError("operator.cols", "missing required key");
    const json& rows = opj["rows"];
    const json& cols = opj["cols"];
    if (!rows.is_array()) throw ParseError("operator.rows", "expected an array of integers");
    if (!cols.is_array()) throw ParseError("operator.cols", "expected an array of integers");
    if (rows.size() != cols.size()) throw ParseError("operator.cols", "length differs from operator.rows");
    std::vector<Entry> entries;
    entries.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::string rf = "operator.rows[" + std::to_string(k) + "]";
      const std::string cf = "operator.cols[" + std::to_string(k) + "]";
      const Index i = io_detail::read_index(rows[k], rf, 1);
      const Index j = io_detail::read_index(cols[k], cf, 1);
      if (i > inst.d1) throw ParseError(rf, "exceeds d1");
      if (j > inst.d2) throw ParseError(cf, "exceeds d2");
      entries.push_back({i - 1, j - 1});
    }
    try {
      inst.op = MeasurementOperator::completion(inst.d1, inst.d2, std::move(entries));
    } catch (const ParameterError& ex) {
      throw ParseError("operator", ex.what());
    }
  } else if (kind == "dense") {
    if (opj.contains("rows") || opj.contains("cols")) {
      throw ParseError(opj.contains("rows") ? "operator.rows" : "operator.cols", "not allowed for a dense operator");
    }
    if (!opj.contains("sensing")) throw ParseError("operator.sensing", "missing required key");
    const json& S = opj["sensing"];
    if (!S.is_array()) throw ParseError("operator.sensing", "expected an array of rows");
    Matrix sensing = io_detail::read_matrix_rows(S, "operator.sensing", static_cast<Index>(S.size()), inst.d1 * inst.d2);
    try {
      inst.op = MeasurementOperator::dense(inst.d1, inst.d2, std::move(sensing));
    } catch (const ParameterError& ex) {
      throw ParseError("operator.sensing", ex.what());
    }
  } else {
    throw ParseError("operator.kind", "expected \"completion\" or \"dense\", got \"" + kind + "\"");
  }

  inst.y = io_detail::read_vector(doc["y"], "y");
  if (inst.y.size() != inst.op.m()) throw ParseError("y", "length does not match the number of measurements");
  if (doc.contains("ground_truth")) {
    inst.ground_truth = io_detail::read_matrix_rows(doc["ground_truth"], "ground_truth", inst.d1, inst.d2);
  }
  if (inst.rank && *inst.rank > std::min(inst.d1, inst.d2)) throw ParseError("rank", "exceeds min(d1, d2)");
  if (inst.ground_truth) {
    const double res = (apply(inst.op, *inst.ground_truth) - inst.y).norm();
    if (res > 1e-12 * std::max(1.0, inst.y.norm())) throw ParseError("ground_truth", "inconsistent with y");
  }
  return inst;
}

inline void write_problem(const std::string& path, const ProblemInstance& inst) {
  io_detail::spit(path, problem_to_string(inst));
}

inline ProblemInstance read_problem(const std::string& path) { return problem_from_string(io_detail::slurp(path)); }

/// {"rows": d1, "cols": d2, "data": [[...], ...]} with row-major data.
inline std::string matrix_to_string(const Matrix& M) {
  std::ostringstream os;
  os << "{\n  \"rows\": " << M.rows() << ",\n  \"cols\": " << M.cols() << ",\n  \"data\": ";
  io_detail::write_matrix_rows(os, M, "  ");
  os << "\n}\n";
  return os.str();
}

inline Matrix matrix_from_string(const std::string& text) {
  const auto doc = io_detail::parse_text(text);
  io_detail::require_keys(doc, "", {"rows", "cols", "data"}, {"rows", "cols", "data"});
  const Index r = io_detail::read_index(doc["rows"], "rows", 1);
  const Index c = io_detail::read_index(doc["cols"], "cols", 1);
  return io_detail::read_matrix_rows(doc["data"], "data", r, c);
}

inline void write_matrix(const std::string& path, const Matrix& M) { io_detail::spit(path, matrix_to_string(M)); }

inline Matrix read_matrix(const std::string& path) { return matrix_from_string(io_detail::slurp(path)); }

}  // namespace hmirls
