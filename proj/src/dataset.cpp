// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "epiforge/log.hpp"

namespace epiforge::data {

Day parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (std::sscanf(iso.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw SchemaError("invalid ISO-8601 date '" + iso + "'");
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw SchemaError("invalid calendar date '" + iso + "'");
  return static_cast<Day>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

std::string format_date(Day day) {
  std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "covid") return TargetMode::Covid;
  if (name == "flu") return TargetMode::Flu;
  throw ConfigError("unknown target mode '" + name + "' (expected covid or flu)");
}

std::string to_string(TargetMode mode) { return mode == TargetMode::Covid ? "covid" : "flu"; }

RegionDataset RegionDataset::head(int n) const {
  if (n < 0 || n > days()) throw IndexError("RegionDataset::head: length out of range");
  RegionDataset out;
  out.region = region;
  out.start = start;
  out.feature_names = feature_names;
  out.features = features.topRows(n);
  out.target = target.head(n);
  out.population = population;
  out.imputations = imputations;
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_cell(const std::string& raw) {
  std::string s = raw;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw SchemaError("non-numeric cell '" + raw + "'");
  }
  if (used != s.size()) throw SchemaError("non-numeric cell '" + raw + "'");
  return v;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

struct Row {
  Day day;
  std::vector<double> values;  // features then target
};

void impute(std::vector<Row>& rows, const std::vector<std::string>& names, RegionDataset& ds) {
  for (std::size_t c = 0; c < names.size(); ++c) {
    double last = std::numeric_limits<double>::quiet_NaN();
    for (Row& r : rows) {
      double& v = r.values[c];
      if (std::isnan(v)) {
        const bool have_last = !std::isnan(last);
        v = have_last ? last : 0.0;
        ds.imputations.push_back(names[c] + "@" + format_date(r.day) + (have_last ? ": forward-filled" : ": zero-filled"));
      }
      last = v;
    }
  }
  if (!ds.imputations.empty()) {
    log::warn("region {}: imputed {} missing cells", ds.region, ds.imputations.size());
  }
}

}  // namespace

std::vector<RegionDataset> parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const std::vector<std::string> header = split_csv_line(line);
  const int date_col = column_index(header, schema.date_column);
  const int region_col = column_index(header, schema.region_column);
  const int target_col = column_index(header, schema.target_column);

  std::vector<std::string> feature_names = schema.feature_columns;
  if (feature_names.empty()) {
    for (const std::string& h : header) {
      if (h != schema.date_column && h != schema.region_column && h != schema.target_column) feature_names.push_back(h);
    }
  }
  std::vector<int> feature_cols;
  for (const std::string& f : feature_names) feature_cols.push_back(column_index(header, f));

  std::map<std::string, std::vector<Row>> by_region;
  std::vector<std::string> region_order;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " cells, got " + std::to_string(cells.size()));
    }
    Row row;
    row.day = parse_date(cells[static_cast<std::size_t>(date_col)]);
    for (int c : feature_cols) row.values.push_back(parse_cell(cells[static_cast<std::size_t>(c)]));
    row.values.push_back(parse_cell(cells[static_cast<std::size_t>(target_col)]));
    const std::string& region = cells[static_cast<std::size_t>(region_col)];
    if (!by_region.count(region)) region_order.push_back(region);
    by_region[region].push_back(std::move(row));
  }

  std::vector<RegionDataset> out;
  for (const std::string& region : region_order) {
    std::vector<Row>& rows = by_region[region];
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.day < b.day; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].day == rows[i - 1].day) {
        throw ContiguityError("region " + region + ": duplicate date " + format_date(rows[i].day));
      }
      if (rows[i].day != rows[i - 1].day + 1) {
        throw ContiguityError("region " + region + ": date gap after " + format_date(rows[i - 1].day) +
                              " (next is " + format_date(rows[i].day) + ")");
      }
    }
    RegionDataset ds;
    ds.region = region;
    ds.start = rows.front().day;
    ds.feature_names = feature_names;
    std::vector<std::string> names = feature_names;
    names.push_back(schema.target_column);
    impute(rows, names, ds);
    const auto T = static_cast<Eigen::Index>(rows.size());
    const auto D = static_cast<Eigen::Index>(feature_names.size());
    ds.features.resize(T, D);
    ds.target.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Row& r = rows[static_cast<std::size_t>(t)];
      for (Eigen::Index j = 0; j < D; ++j) ds.features(t, j) = r.values[static_cast<std::size_t>(j)];
      ds.target(t) = r.values.back();
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<RegionDataset> load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV '" + path + "'");
  return parse_csv(in, schema);
}

void write_csv(std::ostream& out, const std::vector<RegionDataset>& datasets, const CsvSchema& schema) {
  if (datasets.empty()) throw SchemaError("write_csv: no datasets");
  const auto& names = datasets.front().feature_names;
  out << schema.date_column << ',' << schema.region_column;
  for (const std::string& n : names) out << ',' << n;
  out << ',' << schema.target_column << '\n';
  out << std::setprecision(17);
  for (const RegionDataset& ds : datasets) {
    if (ds.feature_names != names) throw SchemaError("write_csv: datasets disagree on feature columns");
    for (int t = 0; t < ds.days(); ++t) {
      out << format_date(ds.start + t) << ',' << ds.region;
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out << ',' << ds.features(t, j);
      out << ',' << ds.target(t) << '\n';
    }
  }
}

void write_csv(const std::string& path, const std::vector<RegionDataset>& datasets, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write CSV '" + path + "'");
  write_csv(out, datasets, schema);
}

Matrix Scaler::transform(const Matrix& x) const {
  Matrix out(x.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(kept[j]);
    const auto k = static_cast<Eigen::Index>(j);
    out.col(k) = (x.col(c).array() - mean(k)) / stddev(k);
  }
  return out;
}

Matrix Scaler::inverse(const Matrix& scaled) const {
  Matrix out(scaled.rows(), scaled.cols());
  for (Eigen::Index k = 0; k < scaled.cols(); ++k) out.col(k) = scaled.col(k).array() * stddev(k) + mean(k);
  return out;
}

ScaledSeries standard_scale(const Matrix& series, int train_rows) {
  if (train_rows < 1 || train_rows > series.rows()) throw IndexError("standard_scale: bad training slice");
  ScaledSeries out;
  std::vector<double> means;
  std::vector<double> stds;
  for (Eigen::Index c = 0; c < series.cols(); ++c) {
    auto slice = series.col(c).head(train_rows);
    const double mu = slice.mean();
    const double var = (slice.array() - mu).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      out.scaler.dropped.push_back(static_cast<int>(c));
      log::info("standard_scale: dropping zero-variance column {}", c);
      continue;
    }
    out.scaler.kept.push_back(static_cast<int>(c));
    means.push_back(mu);
    stds.push_back(sd);
  }
  out.scaler.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
  out.scaler.stddev = Eigen::Map<Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
  out.values = out.scaler.transform(series);
  return out;
}

Vector weekly_target(const Vector& daily, TargetMode mode) {
  const Eigen::Index weeks = daily.size() / 7;
  Vector out(weeks);
  for (Eigen::Index w = 0; w < weeks; ++w) {
    const double s = daily.segment(7 * w, 7).sum();
    out(w) = mode == TargetMode::Covid ? s : s / 7.0;
  }
  return out;
}

}  // namespace epiforge::data
