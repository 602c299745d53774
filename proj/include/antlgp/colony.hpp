#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "antlgp/error.hpp"
#include "antlgp/habitat.hpp"
#include "antlgp/item.hpp"
#include "antlgp/random.hpp"
#include "antlgp/swarm.hpp"

namespace antlgp {

// Square side giving about four cells per item.
inline int default_grid_side(std::size_t n_items) {
  return std::max(3, static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(n_items)))));
}

// About 0.023 agents per cell.
inline int default_ant_count(std::size_t cells) {
  return static_cast<int>(std::ceil(0.023 * static_cast<double>(cells)));
}

struct ColonyConfig {
  int width = 57;
  int height = 57;
  int n_ants = 75;
  std::int64_t t_max = 1'000'000;
  AntParams params;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> snapshot_every;
  std::vector<std::int64_t> snapshot_steps;  // extra explicit snapshot steps
  int entropy_block = 3;
  std::int64_t conservation_every = 10'000;

  void validate(std::size_t n_items) const {
    if (width < 3 || height < 3) throw ConfigError("colony grid must be at least 3x3");
    if (n_ants < 0) throw ConfigError("colony.n_ants must be non-negative");
    if (t_max < 1) throw ConfigError("colony.t_max must be at least 1");
    if (entropy_block < 1) throw ConfigError("colony.entropy_block must be at least 1");
    if (snapshot_every && *snapshot_every < 1) throw ConfigError("snapshot interval must be positive");
    if (conservation_every < 1) throw ConfigError("conservation interval must be positive");
    const auto cells = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (n_items == 0) throw ConfigError("no items to cluster");
    if (n_items + static_cast<std::size_t>(n_ants) > cells) {
      throw ConfigError("grid of " + std::to_string(cells) + " cells cannot hold " +
                        std::to_string(n_items) + " items and " + std::to_string(n_ants) + " ants");
    }
    try {
      params.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

struct Snapshot {
  std::int64_t step = 0;
  std::string csv;
};

struct SimulationResult {
  std::vector<Coord> placements;  // indexed by item id
  std::vector<std::pair<std::int64_t, double>> entropy_trace;
  std::vector<Snapshot> snapshots;
  std::uint64_t seed = 0;
  std::size_t conservation_checks = 0;
  Habitat final_habitat{3, 3};
};

struct ClusterAssignment {
  std::vector<int> cluster_of;  // indexed by item id
  int n_clusters = 0;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(n_clusters), 0);
    for (int c : cluster_of) ++out[static_cast<std::size_t>(c)];
    return out;
  }
};

// Shannon entropy of item counts over block x block tiles (edge tiles
// truncated). Zero when the grid holds no items.
inline double spatial_entropy(const Habitat& habitat, int block) {
  if (block < 1) throw std::invalid_argument("entropy block side must be positive");
  const int tiles_x = (habitat.width() + block - 1) / block;
  const int tiles_y = (habitat.height() + block - 1) / block;
  std::vector<std::size_t> counts(static_cast<std::size_t>(tiles_x) * tiles_y, 0);
  std::size_t total = 0;
  const auto cells = habitat.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].has_item()) continue;
    const Coord c = habitat.coord(i);
    ++counts[static_cast<std::size_t>(c.y / block) * tiles_x + static_cast<std::size_t>(c.x / block)];
    ++total;
  }
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t n : counts) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

// Connected components of item cells, two items linked when their toroidal
// Chebyshev distance is at most link_radius. Cluster 0 is the largest; ties
// go to the component holding the smallest row-major cell index.
inline ClusterAssignment extract_clusters(const Habitat& habitat, std::size_t item_count,
                                          int link_radius) {
  if (link_radius < 1) throw std::invalid_argument("link radius must be positive");
  const auto cells = habitat.cells();
  detail::DisjointSets sets(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].has_item()) continue;
    const Coord c = habitat.coord(i);
    for (int dy = -link_radius; dy <= link_radius; ++dy) {
      for (int dx = -link_radius; dx <= link_radius; ++dx) {
        const std::size_t j = habitat.index(habitat.wrap({c.x + dx, c.y + dy}));
        if (cells[j].has_item()) sets.unite(i, j);
      }
    }
  }

  struct Component {
    std::size_t root;
    std::size_t size;
    std::size_t first_cell;
  };
  std::map<std::size_t, Component> by_root;
  std::size_t on_grid = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].has_item()) continue;
    ++on_grid;
    const std::size_t r = sets.find(i);
    auto [it, fresh] = by_root.try_emplace(r, Component{r, 0, i});
    ++it->second.size;
  }
  if (on_grid == 0) throw std::invalid_argument("no items on the grid");
  if (on_grid != item_count) {
    throw std::invalid_argument("extract_clusters: " + std::to_string(item_count - on_grid) +
                                " items are not on the grid");
  }

  std::vector<Component> comps;
  comps.reserve(by_root.size());
  for (const auto& [r, comp] : by_root) comps.push_back(comp);
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    return a.size != b.size ? a.size > b.size : a.first_cell < b.first_cell;
  });
  std::map<std::size_t, int> label;
  for (std::size_t k = 0; k < comps.size(); ++k) label[comps[k].root] = static_cast<int>(k);

  ClusterAssignment out;
  out.n_clusters = static_cast<int>(comps.size());
  out.cluster_of.assign(item_count, -1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].has_item()) continue;
    const auto id = static_cast<std::size_t>(cells[i].item);
    if (id >= item_count) throw std::invalid_argument("item id out of range");
    out.cluster_of[id] = label[sets.find(i)];
  }
  return out;
}

// Size-weighted mean majority-class fraction over clusters.
inline double purity(const ClusterAssignment& assignment, std::span<const std::optional<int>> labels) {
  if (labels.size() != assignment.cluster_of.size()) {
    throw std::invalid_argument("purity: label count does not match assignment");
  }
  std::vector<std::map<int, std::size_t>> tally(static_cast<std::size_t>(assignment.n_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw std::invalid_argument("purity: item " + std::to_string(i) + " has no label");
    ++tally[static_cast<std::size_t>(assignment.cluster_of[i])][*labels[i]];
  }
  if (labels.empty()) throw std::invalid_argument("purity: no items");
  std::size_t majority_total = 0;
  for (const auto& t : tally) {
    std::size_t best = 0;
    for (const auto& [cls, n] : t) best = std::max(best, n);
    majority_total += best;
  }
  return static_cast<double>(majority_total) / static_cast<double>(labels.size());
}

inline std::vector<std::optional<int>> labels_of(std::span<const DataItem> items) {
  std::vector<std::optional<int>> out;
  out.reserve(items.size());
  for (const DataItem& it : items) out.push_back(it.true_label);
  return out;
}

inline Snapshot snapshot(const Habitat& habitat, std::int64_t step,
                         std::span<const std::optional<int>> labels) {
  std::ostringstream os;
  write_grid_csv(os, habitat, labels);
  return {step, os.str()};
}

// Steps 0 and ceil(10^(k/4)) for k = 0, 1, ... up to t_max, plus t_max.
inline std::vector<std::int64_t> entropy_checkpoints(std::int64_t t_max) {
  std::vector<std::int64_t> out{0};
  for (int k = 0;; ++k) {
    const auto s = static_cast<std::int64_t>(std::ceil(std::pow(10.0, k / 4.0)));
    if (s > t_max) break;
    if (s != out.back()) out.push_back(s);
  }
  if (out.back() != t_max) out.push_back(t_max);
  return out;
}

// Place a carried item on the nearest item-free cell, scanning square rings
// outward from the agent (row by row within a ring).
inline void force_drop(AntAgent& agent, Habitat& habitat) {
  if (!agent.carrying) return;
  const int reach = std::max(habitat.width(), habitat.height());
  for (int r = 0; r <= reach; ++r) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const Coord q = habitat.wrap({agent.pos.x + dx, agent.pos.y + dy});
        if (!habitat.at(q).has_item()) {
          habitat.put_item(q, *agent.carrying);
          agent.carrying.reset();
          return;
        }
      }
    }
  }
  throw InvariantError("no free cell for a carried item");
}

// The clustering driver. Items and agents are scattered at random, then
// every sweep each agent in index order tries to pick or drop, moves, and
// marks its new site; the field evaporates once per sweep.
inline SimulationResult run(const ColonyConfig& config, std::span<const DataItem> items) {
  config.validate(items.size());
  const std::size_t n_features = items.front().features.size();
  for (const DataItem& it : items) {
    if (it.features.size() != n_features) throw ConfigError("items have differing feature counts");
  }

  const AntParams& p = config.params;
  Rng rng(config.seed);
  Habitat habitat(config.width, config.height);
  const auto labels = labels_of(items);

  std::vector<std::size_t> order(habitat.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  for (std::size_t i = 0; i < items.size(); ++i) {
    habitat.put_item(habitat.coord(order[i]), static_cast<ItemId>(i));
  }
  std::vector<std::size_t> free_cells(order.begin() + static_cast<std::ptrdiff_t>(items.size()),
                                      order.end());
  rng.shuffle(free_cells.begin(), free_cells.end());
  std::vector<AntAgent> agents(static_cast<std::size_t>(config.n_ants));
  for (std::size_t a = 0; a < agents.size(); ++a) {
    agents[a].pos = habitat.coord(free_cells[a]);
    agents[a].heading = static_cast<int>(rng.below(kDirections));
    habitat.put_agent(agents[a].pos, static_cast<AgentId>(a));
  }

  SimulationResult result;
  result.seed = config.seed;
  const auto checkpoints = entropy_checkpoints(config.t_max);
  std::size_t next_checkpoint = 0;
  std::vector<std::int64_t> extra_snaps = config.snapshot_steps;
  std::sort(extra_snaps.begin(), extra_snaps.end());
  auto wants_snapshot = [&](std::int64_t t) {
    if (config.snapshot_every && t % *config.snapshot_every == 0) return true;
    return std::binary_search(extra_snaps.begin(), extra_snaps.end(), t);
  };
  auto record = [&](std::int64_t t) {
    while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t) {
      result.entropy_trace.emplace_back(t, spatial_entropy(habitat, config.entropy_block));
      ++next_checkpoint;
    }
    if (wants_snapshot(t)) result.snapshots.push_back(snapshot(habitat, t, labels));
  };
  auto check_conservation = [&] {
    std::size_t carried = 0;
    for (const AntAgent& a : agents) carried += a.carrying ? 1 : 0;
    if (habitat.item_count() + carried != items.size()) {
      throw InvariantError("item conservation violated");
    }
    ++result.conservation_checks;
  };

  record(0);
  for (std::int64_t t = 1; t <= config.t_max; ++t) {
    for (AntAgent& agent : agents) {
      const bool item_here = habitat.at(agent.pos).has_item();
      if (!agent.carrying && item_here) {
        try_pick(agent, habitat, items, p, rng);
      } else if (agent.carrying && !item_here) {
        try_drop(agent, habitat, items, p, rng);
      }
      step_move(agent, habitat, p, rng);
      habitat.deposit(agent.pos, deposit_amount(p.eta, habitat.count_items_around(agent.pos), p.a));
    }
    habitat.evaporate(p.evaporation);
    if (t % config.conservation_every == 0) check_conservation();
    if (t < config.t_max) record(t);
  }
  for (AntAgent& agent : agents) force_drop(agent, habitat);
  check_conservation();
  record(config.t_max);

  result.placements.assign(items.size(), Coord{});
  const auto cells = habitat.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].has_item()) result.placements[static_cast<std::size_t>(cells[i].item)] = habitat.coord(i);
  }
  result.final_habitat = std::move(habitat);
  return result;
}

inline void write_entropy_csv(std::ostream& os,
                              std::span<const std::pair<std::int64_t, double>> trace) {
  os << "step,entropy\n";
  os.precision(17);
  for (const auto& [step, h] : trace) os << step << ',' << h << '\n';
}

inline void write_assignment_csv(std::ostream& os, const ClusterAssignment& a) {
  os << "item_id,cluster_id\n";
  for (std::size_t i = 0; i < a.cluster_of.size(); ++i) os << i << ',' << a.cluster_of[i] << '\n';
}

}  // namespace antlgp
