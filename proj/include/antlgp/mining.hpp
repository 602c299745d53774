#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "antlgp/error.hpp"
#include "antlgp/item.hpp"
#include "antlgp/lgp.hpp"
#include "antlgp/random.hpp"

namespace antlgp {

struct ColumnStats {
  double min = 0.0;
  double max = 1.0;

  double apply(double v) const { return max > min ? (v - min) / (max - min) : 0.5; }
  double invert(double v) const { return max > min ? min + v * (max - min) : min; }
};

struct TimeSeriesRow {
  double index = 0.0;
  double requests = 0.0;
  double bytes = 0.0;
  std::optional<int> cluster;
  std::optional<int> label;
  std::size_t origin = 0;  // chronological row position, kept through re-indexing
};

struct TimeSeriesDataset {
  std::vector<TimeSeriesRow> rows;
  bool normalized = false;
  ColumnStats index_stats;
  ColumnStats requests_stats;
  ColumnStats bytes_stats;
  std::size_t train_rows = 0;  // chronological rows the stats were taken from
  int n_clusters = 0;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  bool has_labels() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.label.has_value(); });
  }
};

enum class CsvSchema { kAuto, kPlain, kLabelled };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_finite(const std::string& s, std::size_t row, const char* column) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (s.empty() || end == b || *end != '\0' || !std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ": column '" + column + "' is not a finite number ('" + s + "')");
  }
  return v;
}

}  // namespace detail

// Reads `index,requests,bytes[,label]` with a header row. `row` numbers in
// error messages count the header as row 1.
inline TimeSeriesDataset parse_csv(std::istream& is, CsvSchema schema = CsvSchema::kAuto) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty input: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool labelled;
  if (line == "index,requests,bytes" && schema != CsvSchema::kLabelled) {
    labelled = false;
  } else if (line == "index,requests,bytes,label" && schema != CsvSchema::kPlain) {
    labelled = true;
  } else {
    throw DataError("header mismatch: expected 'index,requests,bytes[,label]', got '" + line + "'");
  }
  TimeSeriesDataset ds;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != (labelled ? 4u : 3u)) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(labelled ? 4 : 3) +
                      " fields, got " + std::to_string(cells.size()));
    }
    TimeSeriesRow r;
    r.index = detail::parse_finite(cells[0], row, "index");
    if (r.index != std::floor(r.index)) throw DataError("row " + std::to_string(row) + ": index must be an integer");
    r.requests = detail::parse_finite(cells[1], row, "requests");
    r.bytes = detail::parse_finite(cells[2], row, "bytes");
    if (labelled && !cells[3].empty()) {
      const double l = detail::parse_finite(cells[3], row, "label");
      if (l != std::floor(l) || l < 0) throw DataError("row " + std::to_string(row) + ": label must be a non-negative integer");
      r.label = static_cast<int>(l);
    }
    if (!ds.rows.empty() && !(r.index > ds.rows.back().index)) {
      throw DataError("row " + std::to_string(row) + ": index not strictly increasing");
    }
    r.origin = ds.rows.size();
    ds.rows.push_back(r);
  }
  return ds;
}

inline TimeSeriesDataset load_csv(const std::string& path, CsvSchema schema = CsvSchema::kAuto) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return parse_csv(in, schema);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_csv(std::ostream& os, const TimeSeriesDataset& ds) {
  const bool labelled = ds.has_labels();
  os << (labelled ? "index,requests,bytes,label\n" : "index,requests,bytes\n");
  os.precision(17);
  for (const TimeSeriesRow& r : ds.rows) {
    os << static_cast<std::int64_t>(r.index) << ',' << r.requests << ',' << r.bytes;
    if (labelled) os << ',' << *r.label;
    os << '\n';
  }
}

inline std::size_t train_row_count(std::size_t n, double train_fraction) {
  return std::min(n, static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n))));
}

// Min-max scaling with statistics from the first ceil(f * N) rows. Later
// rows may fall outside [0, 1].
inline TimeSeriesDataset normalize(const TimeSeriesDataset& ds, double train_fraction) {
  if (ds.empty()) throw std::invalid_argument("cannot normalize an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1]");
  }
  if (ds.normalized) throw std::invalid_argument("dataset is already normalized");
  TimeSeriesDataset out = ds;
  out.train_rows = std::max<std::size_t>(1, train_row_count(ds.size(), train_fraction));
  auto stats = [&](auto field) {
    ColumnStats s{field(ds.rows[0]), field(ds.rows[0])};
    for (std::size_t i = 0; i < out.train_rows; ++i) {
      s.min = std::min(s.min, field(ds.rows[i]));
      s.max = std::max(s.max, field(ds.rows[i]));
    }
    return s;
  };
  out.index_stats = stats([](const TimeSeriesRow& r) { return r.index; });
  out.requests_stats = stats([](const TimeSeriesRow& r) { return r.requests; });
  out.bytes_stats = stats([](const TimeSeriesRow& r) { return r.bytes; });
  for (TimeSeriesRow& r : out.rows) {
    r.index = out.index_stats.apply(r.index);
    r.requests = out.requests_stats.apply(r.requests);
    r.bytes = out.bytes_stats.apply(r.bytes);
  }
  out.normalized = true;
  return out;
}

inline TimeSeriesDataset denormalize(const TimeSeriesDataset& ds) {
  if (!ds.normalized) throw std::invalid_argument("dataset is not normalized");
  TimeSeriesDataset out = ds;
  for (TimeSeriesRow& r : out.rows) {
    r.index = ds.index_stats.invert(r.index);
    r.requests = ds.requests_stats.invert(r.requests);
    r.bytes = ds.bytes_stats.invert(r.bytes);
  }
  out.normalized = false;
  return out;
}

inline double column_value(const TimeSeriesRow& r, const std::string& column) {
  if (column == "index") return r.index;
  if (column == "requests") return r.requests;
  if (column == "bytes") return r.bytes;
  throw ConfigError("unknown column '" + column + "' (expected index, requests or bytes)");
}

// One item per row; features are the selected normalized columns clipped
// to [0, 1].
inline std::vector<DataItem> items_from_dataset(const TimeSeriesDataset& ds,
                                                const std::vector<std::string>& columns) {
  if (columns.empty()) throw ConfigError("no feature columns selected");
  if (!ds.normalized) throw std::invalid_argument("items need a normalized dataset");
  for (const std::string& c : columns) column_value(TimeSeriesRow{}, c);
  std::vector<DataItem> items;
  items.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    DataItem it;
    for (const std::string& c : columns) it.features.push_back(std::clamp(column_value(ds.rows[i], c), 0.0, 1.0));
    it.true_label = ds.rows[i].label;
    it.source_index = i;
    items.push_back(std::move(it));
  }
  return items;
}

// Fills the cluster column and stably sorts rows by cluster id. The index
// column becomes the new rank (scaled to [0, 1] on normalized data).
inline TimeSeriesDataset reindex_with_clusters(const TimeSeriesDataset& ds, std::span<const int> cluster_of) {
  if (cluster_of.size() != ds.size()) {
    throw std::invalid_argument("cluster assignment covers " + std::to_string(cluster_of.size()) + " of " +
                                std::to_string(ds.size()) + " rows");
  }
  TimeSeriesDataset out = ds;
  int top = -1;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (cluster_of[i] < 0) throw std::invalid_argument("row " + std::to_string(i) + " has no cluster");
    out.rows[i].cluster = cluster_of[i];
    top = std::max(top, cluster_of[i]);
  }
  out.n_clusters = top + 1;
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const TimeSeriesRow& a, const TimeSeriesRow& b) { return *a.cluster < *b.cluster; });
  const double denom = out.size() > 1 ? static_cast<double>(out.size() - 1) : 1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.rows[i].index = ds.normalized ? static_cast<double>(i) / denom : static_cast<double>(i);
  }
  return out;
}

inline double cluster_feature(const TimeSeriesRow& r, int n_clusters) {
  if (!r.cluster || n_clusters <= 1) return 0.5;
  return static_cast<double>(*r.cluster) / static_cast<double>(n_clusters - 1);
}

// Position of the requests value inside a case's input vector.
inline constexpr std::size_t kRequestsInput = 1;

struct SupervisedCases {
  lgp::Cases cases;
  std::vector<std::size_t> input_row;   // dataset position of each case's inputs
  std::vector<std::size_t> target_row;  // dataset position of each case's target
  std::size_t horizon = 1;
};

// Case t: inputs [index, requests, bytes, cluster] of row t, target the
// requests of row t + h.
inline SupervisedCases make_supervised(const TimeSeriesDataset& ds, std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (ds.size() <= horizon) {
    throw std::invalid_argument("dataset of " + std::to_string(ds.size()) + " rows is too short for horizon " +
                                std::to_string(horizon));
  }
  SupervisedCases out;
  out.horizon = horizon;
  out.cases.n_inputs = 4;
  for (std::size_t t = 0; t + horizon < ds.size(); ++t) {
    const TimeSeriesRow& r = ds.rows[t];
    const double in[4] = {r.index, r.requests, r.bytes, cluster_feature(r, ds.n_clusters)};
    out.cases.add(in, ds.rows[t + horizon].requests);
    out.input_row.push_back(t);
    out.target_row.push_back(t + horizon);
  }
  return out;
}

struct CaseSplit {
  lgp::Cases train;
  lgp::Cases validation;
  lgp::Cases test;
};

// Chronological split on each row's origin. A case is a test case when its
// target falls after the training period; it is a training case only when
// both its input and target rows fall inside it. The last
// `validation_fraction` of the training period feeds validation instead.
inline CaseSplit split_cases(const TimeSeriesDataset& ds, const SupervisedCases& sup, double train_fraction,
                             double validation_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  const std::size_t train_end = train_row_count(ds.size(), train_fraction);
  const std::size_t val_start =
      train_end - std::min(train_end, static_cast<std::size_t>(std::floor(validation_fraction * train_end)));
  CaseSplit out;
  out.train.n_inputs = out.validation.n_inputs = out.test.n_inputs = sup.cases.n_inputs;
  for (std::size_t i = 0; i < sup.cases.size(); ++i) {
    const std::size_t in_origin = ds.rows[sup.input_row[i]].origin;
    const std::size_t tgt_origin = ds.rows[sup.target_row[i]].origin;
    const auto x = sup.cases.inputs(i);
    const double y = sup.cases.y[i];
    if (tgt_origin >= train_end) {
      out.test.add(x, y);
    } else if (in_origin < train_end) {
      (std::max(in_origin, tgt_origin) >= val_start ? out.validation : out.train).add(x, y);
    }
  }
  if (out.validation.empty()) out.validation = out.train;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic fixtures
// ---------------------------------------------------------------------------

// k labelled 2-D Gaussian blobs. Centres sit on a square lattice spanning
// [0.2, 0.8]^2 (a single class sits at the middle); points are clipped to
// [0, 1].
inline std::vector<DataItem> synth_gaussian_classes(int k, int per_class, double spread, Rng& rng) {
  if (k < 1) throw std::invalid_argument("need at least one class");
  if (per_class < 0 || spread < 0.0) throw std::invalid_argument("bad fixture shape");
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  auto coord = [&](int i) { return side == 1 ? 0.5 : 0.2 + 0.6 * i / (side - 1); };
  std::vector<DataItem> items;
  items.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(per_class));
  for (int c = 0; c < k; ++c) {
    const double cx = coord(c % side);
    const double cy = coord(c / side);
    for (int i = 0; i < per_class; ++i) {
      DataItem it;
      const double x = spread > 0.0 ? rng.normal(cx, spread) : cx;
      const double y = spread > 0.0 ? rng.normal(cy, spread) : cy;
      it.features = {std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0)};
      it.true_label = c;
      it.source_index = items.size();
      items.push_back(std::move(it));
    }
  }
  return items;
}

enum class Granularity { kHourly, kDaily };

struct TrafficShape {
  double base = 2000.0;       // overnight request level
  double amplitude = 6000.0;  // height of the afternoon peak
  double weekday_gain = 1.5;  // Monday-Friday peak multiplier
  double bytes_per_request = 12'000.0;
  double bytes_offset = 50'000.0;
};

// Diurnal profile in [0, 1]: raised cosine centred on 14:00, so the busy
// stretch is roughly 11:00-17:00.
inline double diurnal_profile(double hour) {
  return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * (hour - 14.0) / 24.0));
}

inline double traffic_mean(std::size_t hour_index, const TrafficShape& s = {}) {
  const std::size_t day = hour_index / 24;
  const bool weekday = day % 7 < 5;  // day 0 is a Monday
  return s.base + s.amplitude * diurnal_profile(static_cast<double>(hour_index % 24)) *
                      (weekday ? s.weekday_gain : 1.0);
}

// Hourly requests: diurnal peak, weekday amplification and Gaussian noise of
// `noise * amplitude`. Bytes are an affine function of the noise-free
// request level plus their own independent noise, so requests and bytes are
// two noisy readings of the same load. The daily series sums each day's
// hours.
inline TimeSeriesDataset synth_traffic(int weeks, Granularity g, double noise, Rng& rng,
                                       const TrafficShape& shape = {}) {
  if (weeks < 1) throw std::invalid_argument("need at least one week");
  if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
  const std::size_t hours = static_cast<std::size_t>(weeks) * 7 * 24;
  TimeSeriesDataset hourly;
  for (std::size_t t = 0; t < hours; ++t) {
    TimeSeriesRow r;
    r.index = static_cast<double>(t);
    const double level = traffic_mean(t, shape);
    r.requests = std::max(0.0, level + (noise > 0.0 ? rng.normal(0.0, noise * shape.amplitude) : 0.0));
    const double byte_noise = noise > 0.0 ? rng.normal(0.0, noise * shape.amplitude * shape.bytes_per_request) : 0.0;
    r.bytes = std::max(0.0, shape.bytes_offset + shape.bytes_per_request * level + byte_noise);
    r.origin = t;
    hourly.rows.push_back(r);
  }
  if (g == Granularity::kHourly) return hourly;
  TimeSeriesDataset daily;
  for (std::size_t d = 0; d * 24 < hours; ++d) {
    TimeSeriesRow r;
    r.index = static_cast<double>(d);
    r.requests = 0.0;
    r.bytes = 0.0;
    for (std::size_t h = 0; h < 24; ++h) {
      r.requests += hourly.rows[d * 24 + h].requests;
      r.bytes += hourly.rows[d * 24 + h].bytes;
    }
    r.origin = d;
    daily.rows.push_back(r);
  }
  return daily;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct Report {
  double rmse_train = 0.0;
  double rmse_test = 0.0;
  double cc_test = 0.0;
  double rmse_persistence = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Persistence forecaster: the current requests value predicts the target.
inline double persistence_rmse(const lgp::Cases& cases) {
  std::vector<double> pred(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) pred[i] = cases.inputs(i)[kRequestsInput];
  return lgp::rmse(pred, cases.y);
}

// Train/test RMSE, test correlation and the persistence baseline. An
// undefined correlation (constant predictions or targets) is reported as 0.
inline Report report(const lgp::Program& program, const lgp::VmLayout& layout, const lgp::Cases& train,
                     const lgp::Cases& test) {
  const lgp::CompiledProgram prog(program, layout);
  Report r;
  r.rmse_train = lgp::fitness_rmse(prog, train);
  r.rmse_test = lgp::fitness_rmse(prog, test);
  const auto pred = lgp::predict(prog, test);
  try {
    r.cc_test = lgp::correlation_coefficient(pred, test.y);
  } catch (const std::domain_error&) {
    r.cc_test = 0.0;
  }
  r.rmse_persistence = persistence_rmse(test);
  return r;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["rmse_train"] = r.rmse_train;
  j["rmse_test"] = r.rmse_test;
  j["cc_test"] = r.cc_test;
  j["rmse_persistence"] = r.rmse_persistence;
  j["seed"] = r.seed;
  j["config_digest"] = r.config_digest;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  r.rmse_train = j.at("rmse_train").get<double>();
  r.rmse_test = j.at("rmse_test").get<double>();
  r.cc_test = j.at("cc_test").get<double>();
  r.rmse_persistence = j.at("rmse_persistence").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_digest = j.at("config_digest").get<std::string>();
  return r;
}

}  // namespace antlgp
