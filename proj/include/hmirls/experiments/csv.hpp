#pragma once

// CSV emission: header row, comma separated, '\n' line endings, floats with
// 17 significant digits. Absent or NaN values are written as empty fields.

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hmirls/solver.hpp"

namespace hmirls::experiments {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw ParameterError("CsvWriter: field count does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find_first_of(",\"\n") != std::string::npos) {
        throw ParameterError("CsvWriter: field needs quoting: " + fields[i]);
      }
      out_ << (i ? "," : "") << fields[i];
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::size_t columns_;
  std::ostringstream out_;
};

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{"variant", "p", "iter", "rel_change", "rel_error", "epsilon", "g_eps_p"};
  return cols;
}

inline void append_trace_rows(CsvWriter& csv, const std::string& variant, double p, const SolveTrace& trace) {
  for (const auto& r : trace.records) {
    csv.row({variant, csv_number(p), std::to_string(r.n), csv_number(r.rel_change), csv_number(r.rel_error),
             csv_number(r.epsilon), csv_number(r.g_eps_p)});
  }
}

/// One solve as a per-iteration table.
inline std::string trace_csv(Variant variant, double p, const SolveTrace& trace) {
  CsvWriter csv(trace_columns());
  append_trace_rows(csv, to_string(variant), p, trace);
  return csv.str();
}

/// Parsed trace row; empty fields come back as NaN.
struct TraceRow {
  std::string variant;
  double p = 0.0;
  int iter = 0;
  double rel_change = 0.0;
  double rel_error = 0.0;
  double epsilon = 0.0;
  double g_eps_p = 0.0;
};

inline std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("header", "empty trace file");
  {
    std::string expect;
    for (std::size_t i = 0; i < trace_columns().size(); ++i) expect += (i ? "," : "") + trace_columns()[i];
    if (line != expect) throw ParseError("header", "expected '" + expect + "'");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  auto num = [&](const std::string& s, const std::string& col) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + " column " + col, "not a number: '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != trace_columns().size()) {
      throw ParseError("line " + std::to_string(lineno), "expected " + std::to_string(trace_columns().size()) + " fields");
    }
    TraceRow r;
    r.variant = f[0];
    r.p = num(f[1], "p");
    const double it = num(f[2], "iter");
    if (!(it >= 1.0) || it != std::floor(it)) throw ParseError("line " + std::to_string(lineno) + " column iter", "expected a positive integer");
    r.iter = static_cast<int>(it);
    r.rel_change = num(f[3], "rel_change");
    r.rel_error = num(f[4], "rel_error");
    r.epsilon = num(f[5], "epsilon");
    r.g_eps_p = num(f[6], "g_eps_p");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hmirls::experiments
