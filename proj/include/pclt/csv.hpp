#pragma once

// Minimal CSV ingestion: a header row, numeric feature columns and one label
// column. Quoted fields are supported (RFC 4180 style, no embedded newlines).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pclt/core.hpp"
#include "pclt/error.hpp"

namespace pclt {

struct CsvOptions {
  std::string label_column;
  /// How to interpret the label. Classification labels that are not
  /// integers in [0, K) are mapped to dense codes in sorted order.
  TaskType task = TaskType::Binary;
  std::vector<double> thresholds;  // regression grid, optional
  char delimiter = ',';
};

struct CsvData {
  ContextTable table;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_levels;  // classification: code -> original text
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw DataError("CSV row " + std::to_string(row) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

}  // namespace detail

/// Rows and columns in error messages are 1-based; row 1 is the header.
inline CsvData read_csv(std::istream& in, const CsvOptions& opt) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw DataError("CSV is empty (no header row)");
  auto header = detail::split_csv_line(line, opt.delimiter, 1);
  for (auto& h : header) h = detail::trim(h);
  const auto lab_it = std::find(header.begin(), header.end(), opt.label_column);
  if (lab_it == header.end()) throw DataError("CSV has no label column '" + opt.label_column + "'");
  const std::size_t lab = static_cast<std::size_t>(lab_it - header.begin());

  CsvData data;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != lab) data.feature_names.push_back(header[c]);

  std::vector<std::vector<double>> xs;
  std::vector<std::string> raw_labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line, opt.delimiter, row);
    if (fields.size() != header.size()) {
      throw DataError("CSV row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> x;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == lab) continue;
      double v;
      if (!detail::parse_double(fields[c], v) || !std::isfinite(v)) {
        throw DataError("CSV row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" +
                        header[c] + "'): not a finite number: '" + fields[c] + "'");
      }
      x.push_back(v);
    }
    xs.push_back(std::move(x));
    raw_labels.push_back(detail::trim(fields[lab]));
  }
  if (xs.empty()) throw DataError("CSV has a header but no data rows");

  TaskKind task;
  std::vector<double> ys(xs.size());
  if (opt.task == TaskType::RegressionCdf) {
    task = TaskKind::regression_cdf(opt.thresholds);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!detail::parse_double(raw_labels[i], ys[i]) || !std::isfinite(ys[i])) {
        throw DataError("CSV row " + std::to_string(i + 2) + ", column " + std::to_string(lab + 1) +
                        ": response is not a finite number");
      }
    }
  } else {
    // Numeric labels sort numerically, text labels lexicographically.
    bool numeric = true;
    std::vector<double> nums(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
      numeric = numeric && detail::parse_double(raw_labels[i], nums[i]);
    std::vector<std::string> levels;
    if (numeric) {
      std::vector<double> u = nums;
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      const bool already_codes =
          std::all_of(u.begin(), u.end(), [](double v) { return v >= 0 && v == std::floor(v); });
      const int k = already_codes ? static_cast<int>(u.back()) + 1 : static_cast<int>(u.size());
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = already_codes ? nums[i]
                              : static_cast<double>(std::lower_bound(u.begin(), u.end(), nums[i]) - u.begin());
      }
      if (already_codes) {
        for (int c = 0; c < k; ++c) levels.push_back(std::to_string(c));
      } else {
        for (double v : u) {
          std::ostringstream os;
          os << v;
          levels.push_back(os.str());
        }
      }
    } else {
      levels = raw_labels;
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = static_cast<double>(std::lower_bound(levels.begin(), levels.end(), raw_labels[i]) -
                                    levels.begin());
      }
    }
    const int k = std::max<int>(2, static_cast<int>(levels.size()));
    if (opt.task == TaskType::Binary) {
      if (levels.size() > 2) throw DataError("binary task but label column has " + std::to_string(levels.size()) + " levels");
      task = TaskKind::binary();
    } else {
      task = TaskKind::multiclass(k);
    }
    data.label_levels = std::move(levels);
  }

  std::vector<Observation> rows;
  rows.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) rows.push_back({std::move(xs[i]), ys[i]});
  data.table = ContextTable::validated(std::move(rows), task);
  return data;
}

inline CsvData read_csv_file(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file " + path);
  return read_csv(in, opt);
}

}  // namespace pclt
