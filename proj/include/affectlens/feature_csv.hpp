#pragma once

// Feature table CSV: `example_id,emotion,correct,<features...>`, one row per
// example. `correct` is 1, 0 or empty; floats carry 9 significant digits.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "affectlens/aggregate.hpp"
#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"

namespace affectlens {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<FeatureVector> rows;

  stats::Matrix matrix() const { return feature_matrix(rows); }
};

inline void write_feature_csv(std::ostream& os, const FeatureTable& table) {
  os << "example_id,emotion,correct";
  for (const auto& n : table.names) os << ',' << n;
  os << '\n';
  for (const auto& r : table.rows) {
    os << r.example_id << ',' << to_string(r.emotion) << ',';
    if (r.correct) os << (*r.correct ? '1' : '0');
    for (double v : r.values) os << ',' << format_real(v);
    os << '\n';
  }
}

inline void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": cannot write");
  write_feature_csv(out, table);
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": write failed");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

inline FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string() + " does not exist");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "example_id" || header[1] != "emotion" ||
      header[2] != "correct") {
    throw Error(ErrorKind::ParseError,
                path.string() + ": header must start with example_id,emotion,correct");
  }
  FeatureTable t;
  t.names.assign(header.begin() + 3, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::ParseError, where + ": expected " + std::to_string(header.size()) +
                                             " cells, got " + std::to_string(cells.size()));
    }
    FeatureVector fv;
    fv.example_id = cells[0];
    fv.emotion = parse_emotion(cells[1]);
    if (cells[2] == "1" || cells[2] == "true") {
      fv.correct = true;
    } else if (cells[2] == "0" || cells[2] == "false") {
      fv.correct = false;
    } else if (!cells[2].empty()) {
      throw Error(ErrorKind::ParseError, where + ": correct must be 1, 0 or empty");
    }
    fv.values.reserve(t.names.size());
    for (std::size_t c = 3; c < cells.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || end != cells[c].c_str() + cells[c].size() || !std::isfinite(v)) {
        throw Error(ErrorKind::ParseError, where + ": bad number '" + cells[c] + "'");
      }
      fv.values.push_back(v);
    }
    t.rows.push_back(std::move(fv));
  }
  return t;
}

}  // namespace affectlens
