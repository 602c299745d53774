#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "antlgp/colony.hpp"
#include "antlgp/config.hpp"
#include "antlgp/error.hpp"
#include "antlgp/lgp.hpp"
#include "antlgp/mining.hpp"

namespace antlgp {

// ---------------------------------------------------------------------------
// Item and case files
// ---------------------------------------------------------------------------

// Header "label,f0,...,f<F-1>"; an empty label field means unlabelled.
inline void write_items_csv(std::ostream& os, std::span<const DataItem> items) {
  const std::size_t f = items.empty() ? 0 : items.front().features.size();
  os << "label";
  for (std::size_t i = 0; i < f; ++i) os << ",f" << i;
  os << '\n';
  os.precision(17);
  for (const DataItem& it : items) {
    if (it.true_label) os << *it.true_label;
    for (double v : it.features) os << ',' << v;
    os << '\n';
  }
}

inline std::vector<DataItem> read_items_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("item file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "label") throw DataError("item header must be 'label,f0,...'");
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "f" + std::to_string(i - 1)) throw DataError("item header must be 'label,f0,...'");
  }
  std::vector<DataItem> items;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("row " + std::to_string(row) + ": wrong field count");
    DataItem it;
    if (!cells[0].empty()) it.true_label = static_cast<int>(detail::parse_finite(cells[0], row, "label"));
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const double v = detail::parse_finite(cells[i], row, "feature");
      if (v < 0.0 || v > 1.0) throw DataError("row " + std::to_string(row) + ": features must lie in [0, 1]");
      it.features.push_back(v);
    }
    it.source_index = items.size();
    items.push_back(std::move(it));
  }
  return items;
}

// Header "x0,...,x<k-1>,target".
inline void write_cases_csv(std::ostream& os, const lgp::Cases& cases) {
  for (std::size_t i = 0; i < cases.n_inputs; ++i) os << 'x' << i << ',';
  os << "target\n";
  os.precision(17);
  for (std::size_t r = 0; r < cases.size(); ++r) {
    for (double v : cases.inputs(r)) os << v << ',';
    os << cases.y[r] << '\n';
  }
}

inline lgp::Cases read_cases_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("case file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "target") throw DataError("case header must be 'x0,...,target'");
  lgp::Cases cases;
  cases.n_inputs = header.size() - 1;
  std::size_t row = 1;
  std::vector<double> in(cases.n_inputs);
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("row " + std::to_string(row) + ": wrong field count");
    for (std::size_t i = 0; i < cases.n_inputs; ++i) in[i] = detail::parse_finite(cells[i], row, "input");
    cases.add(in, detail::parse_finite(cells.back(), row, "target"));
  }
  if (cases.empty()) throw DataError("case file has no rows");
  return cases;
}

// Cases for y = x1 * x2 + x1 with inputs uniform in [-1, 1]^2.
inline lgp::Cases synth_product_cases(std::size_t n, Rng& rng) {
  lgp::Cases cases;
  cases.n_inputs = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    const double in[2] = {a, b};
    cases.add(in, a * b + a);
  }
  return cases;
}

// ---------------------------------------------------------------------------
// Clustering + forecasting
// ---------------------------------------------------------------------------

// Runs `f`, prefixing any error message with the stage name. The error
// category (config / data / invariant) is preserved.
template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const DecodeError& e) {
    throw DecodeError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(tag + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(tag + e.what());
  } catch (const std::domain_error& e) {
    throw DataError(tag + e.what());
  }
}

struct ClusteringOutput {
  SimulationResult simulation;
  ClusterAssignment assignment;
  std::optional<double> purity;
};

inline ClusteringOutput cluster_items(const RunConfig& cfg, std::span<const DataItem> items) {
  const ColonyConfig colony = staged("config", [&] { return resolve_colony(cfg, items.size()); });
  ClusteringOutput out{staged("cluster", [&] { return run(colony, items); }), {}, std::nullopt};
  out.assignment = staged("extract", [&] {
    return extract_clusters(out.simulation.final_habitat, items.size(), cfg.mining.link_radius);
  });
  const auto labels = labels_of(items);
  if (!items.empty() && std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); })) {
    out.purity = purity(out.assignment, labels);
  }
  return out;
}

struct PipelineOutput {
  TimeSeriesDataset normalized;
  TimeSeriesDataset reindexed;
  std::optional<ClusteringOutput> clustering;
  CaseSplit split;
  lgp::EvolutionResult evolution;
  Report report;
};

// normalize -> items -> cluster -> reindex -> supervised cases -> evolve ->
// report. With mining.use_clusters off the clustering stages are skipped and
// the cluster input is constant.
inline PipelineOutput run_pipeline(const RunConfig& cfg, const TimeSeriesDataset& raw) {
  PipelineOutput out;
  out.normalized = staged("normalize", [&] { return normalize(raw, cfg.mining.train_fraction); });
  std::vector<int> cluster_of(out.normalized.size(), 0);
  if (cfg.mining.use_clusters) {
    const auto items = staged("items", [&] { return items_from_dataset(out.normalized, cfg.mining.cluster_columns); });
    out.clustering = cluster_items(cfg, items);
    cluster_of = out.clustering->assignment.cluster_of;
  }
  out.reindexed = staged("reindex", [&] {
    TimeSeriesDataset ds = reindex_with_clusters(out.normalized, cluster_of);
    if (!cfg.mining.use_clusters) ds.n_clusters = 1;
    return ds;
  });
  const SupervisedCases sup = staged("supervise", [&] { return make_supervised(out.reindexed, cfg.mining.horizon); });
  out.split = staged("split", [&] {
    return split_cases(out.reindexed, sup, cfg.mining.train_fraction, cfg.mining.validation_fraction);
  });
  if (out.split.train.empty() || out.split.test.empty()) throw DataError("[split] empty train or test partition");
  out.evolution = staged("evolve", [&] { return lgp::evolve(resolve_evolution(cfg), out.split.train, out.split.validation); });
  out.report = staged("report", [&] { return report(out.evolution.best, out.evolution.layout, out.split.train, out.split.test); });
  out.report.seed = cfg.seed;
  out.report.config_digest = config_digest(cfg);
  return out;
}

}  // namespace antlgp
