// CSV ingestion and output for datasets, simulation truth and fit results.
//
// Files are plain comma-separated text with a header row and '.' decimals.
// Fields are never quoted; a field containing a comma or quote is rejected.
// Doubles are written with 17 significant digits so values round-trip.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "svr/dataset.hpp"

namespace svr::io {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based physical line of each row

  std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw InputError(path + ": missing column '" + std::string(name) + "'");
  }

  double number(std::size_t r, std::size_t c) const {
    const std::string& f = rows[r][c];
    double v = 0.0;
    const char* end = f.data() + f.size();
    auto [ptr, ec] = std::from_chars(f.data(), end, v);
    if (ec != std::errc() || ptr != end || f.empty() || !std::isfinite(v))
      throw InputError(path + " line " + std::to_string(lines[r]) + ": column '" + header[c] +
                       "' is not a finite number: '" + f + "'");
    return v;
  }

  long integer(std::size_t r, std::size_t c) const {
    const std::string& f = rows[r][c];
    long v = 0;
    const char* end = f.data() + f.size();
    auto [ptr, ec] = std::from_chars(f.data(), end, v);
    if (ec != std::errc() || ptr != end || f.empty())
      throw InputError(path + " line " + std::to_string(lines[r]) + ": column '" + header[c] +
                       "' is not an integer: '" + f + "'");
    return v;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable t;
  t.path = path.string();
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    if (line.find('"') != std::string::npos)
      throw InputError(t.path + " line " + std::to_string(lineno) + ": quoted fields are not supported");
    auto fields = detail::split(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw InputError(t.path + " line " + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw InputError(t.path + ": empty file");
  return t;
}

/// Builds a validated Dataset from observations (subject_id, group, time,
/// value) and covariates (subject_id, x1, x2, ...). The intercept is
/// prepended; subjects keep their order of first appearance.
inline Dataset ingest(const std::filesystem::path& observations, const std::filesystem::path& covariates) {
  const CsvTable obs = read_csv(observations);
  const std::size_t c_id = obs.column("subject_id");
  const std::size_t c_group = obs.column("group");
  const std::size_t c_time = obs.column("time");
  const std::size_t c_value = obs.column("value");

  Dataset d;
  std::map<std::string, std::size_t> index;
  std::vector<std::map<double, std::size_t>> seen;  // time -> line, per subject
  std::vector<std::vector<std::pair<double, double>>> points;
  for (std::size_t r = 0; r < obs.rows.size(); ++r) {
    const std::string& id = obs.rows[r][c_id];
    const std::string where = obs.path + " line " + std::to_string(obs.lines[r]);
    if (id.empty()) throw InputError(where + ": empty subject_id");
    const long group = obs.integer(r, c_group);
    const double t = obs.number(r, c_time);
    const double y = obs.number(r, c_value);
    if (group < 1) throw InputError(where + ": group must be a positive integer");
    auto [it, fresh] = index.emplace(id, d.subjects.size());
    if (fresh) {
      Subject s;
      s.id = id;
      s.group = static_cast<int>(group);
      d.subjects.push_back(std::move(s));
      seen.emplace_back();
      points.emplace_back();
    }
    Subject& s = d.subjects[it->second];
    if (s.group != group)
      throw InputError(where + ": subject '" + id + "' changes group from " + std::to_string(s.group) +
                       " to " + std::to_string(group));
    auto [prev, unique] = seen[it->second].emplace(t, obs.lines[r]);
    if (!unique)
      throw InputError(where + ": duplicate time " + obs.rows[r][c_time] + " for subject '" + id +
                       "' (first seen on line " + std::to_string(prev->second) + ")");
    points[it->second].emplace_back(t, y);
  }
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    std::sort(points[i].begin(), points[i].end());
    for (const auto& [t, y] : points[i]) {
      d.subjects[i].times.push_back(t);
      d.subjects[i].values.push_back(y);
    }
  }

  const CsvTable cov = read_csv(covariates);
  const std::size_t v_id = cov.column("subject_id");
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < cov.header.size(); ++c)
    if (c != v_id) {
      cols.push_back(c);
      d.covariate_names.push_back(cov.header[c]);
    }
  std::vector<bool> has(d.subjects.size(), false);
  for (std::size_t r = 0; r < cov.rows.size(); ++r) {
    const std::string& id = cov.rows[r][v_id];
    const std::string where = cov.path + " line " + std::to_string(cov.lines[r]);
    auto it = index.find(id);
    if (it == index.end()) throw InputError(where + ": covariates for unknown subject '" + id + "'");
    if (has[it->second]) throw InputError(where + ": duplicate covariate row for subject '" + id + "'");
    has[it->second] = true;
    auto& x = d.subjects[it->second].covariates;
    x.push_back(1.0);
    for (std::size_t c : cols) x.push_back(cov.number(r, c));
  }
  for (std::size_t i = 0; i < d.subjects.size(); ++i)
    if (!has[i]) throw InputError(cov.path + ": no covariates for subject '" + d.subjects[i].id + "'");

  try {
    d.finalize(2);
  } catch (const std::invalid_argument& e) {
    throw InputError(obs.path + ": " + e.what());
  }
  return d;
}

/// Line-oriented CSV writer.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  CsvWriter& row(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out_ << ',';
      out_ << fields[k];
    }
    out_ << '\n';
    return *this;
  }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  CsvWriter obs(dir / "observations.csv");
  obs.row({"subject_id", "group", "time", "value"});
  for (const Subject& s : d.subjects)
    for (std::size_t j = 0; j < s.times.size(); ++j)
      obs.row({s.id, std::to_string(s.group), format_double(s.times[j]), format_double(s.values[j])});
  obs.close();
  CsvWriter cov(dir / "covariates.csv");
  std::vector<std::string> head{"subject_id"};
  head.insert(head.end(), d.covariate_names.begin(), d.covariate_names.end());
  cov.row(head);
  for (const Subject& s : d.subjects) {
    std::vector<std::string> r{s.id};
    for (std::size_t c = 1; c < s.covariates.size(); ++c) r.push_back(format_double(s.covariates[c]));
    cov.row(r);
  }
  cov.close();
}

}  // namespace svr::io
