#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "antlgp/habitat.hpp"
#include "antlgp/item.hpp"
#include "antlgp/random.hpp"

namespace antlgp {

// How the per-neighbour votes are turned into a pick/drop decision.
enum class VoteRule {
  kAtLeastHalf,  // 2 * sum >= n
  kMoreThanHalf  // 2 * sum >  n
};

struct AntParams {
  double beta = 3.5;       // osmotropotactic sensitivity
  double delta = 0.2;      // inverse sensory capacity
  double eta = 0.07;       // constant deposit per step (h)
  double evaporation = 0.015;  // K
  double a = 400.0;        // item-count divisor of the deposit
  double k1 = 0.1;         // drop similarity constant
  double k2 = 0.3;         // pick similarity constant
  double theta_items = 5.0;
  double resp_exponent = 2.0;
  // w for turns of 0, 45, 90, 135, 180 degrees.
  std::array<double, 5> dir_weights{1.0, 1.0 / 2.0, 1.0 / 4.0, 1.0 / 12.0, 1.0 / 20.0};
  double d_max = 1.0;
  VoteRule vote_rule = VoteRule::kAtLeastHalf;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("ant parameter ") + name + " must be positive");
      }
    };
    positive(beta, "beta");
    positive(delta, "delta");
    positive(a, "a");
    positive(k1, "k1");
    positive(k2, "k2");
    positive(theta_items, "theta_items");
    positive(resp_exponent, "resp_exponent");
    positive(d_max, "d_max");
    if (!(eta >= 0.0)) throw std::invalid_argument("ant parameter eta must be non-negative");
    if (!(evaporation >= 0.0 && evaporation < 1.0)) {
      throw std::invalid_argument("evaporation rate must lie in [0, 1)");
    }
    double top = 0.0;
    for (double w : dir_weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("direction weights must be non-negative");
      top = std::max(top, w);
    }
    if (!(top > 0.0)) throw std::invalid_argument("at least one direction weight must be positive");
    if (dir_weights[0] != top) {
      throw std::invalid_argument("straight-ahead direction weight must be the largest");
    }
  }
};

struct AntAgent {
  Coord pos;
  int heading = 0;  // index into kDirectionOffsets
  std::optional<ItemId> carrying;
};

// W(sigma) = (1 + sigma / (1 + delta sigma))^beta
inline double pheromone_weight(double sigma, const AntParams& p) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("pheromone density must be non-negative");
  return std::pow(1.0 + sigma / (1.0 + p.delta * sigma), p.beta);
}

// Circular heading difference folded to 0..4 (0 = straight, 4 = U-turn).
inline int fold_turn(int turn) {
  const int t = ((turn % kDirections) + kDirections) % kDirections;
  return t > kDirections / 2 ? kDirections - t : t;
}

inline double direction_weight(int turn, const AntParams& p) {
  return p.dir_weights[static_cast<std::size_t>(fold_turn(turn))];
}

struct TransitionEntry {
  Coord cell;
  int direction = 0;
  double probability = 0.0;
};

// Normalised move probabilities over the neighbours not held by another agent.
struct TransitionTable {
  std::array<TransitionEntry, kDirections> entries{};
  int size = 0;

  bool empty() const { return size == 0; }
  std::span<const TransitionEntry> view() const {
    return {entries.data(), static_cast<std::size_t>(size)};
  }
};

inline TransitionTable transition_distribution(const Habitat& habitat, const AntAgent& agent,
                                               const AntParams& p) {
  TransitionTable table;
  double total = 0.0;
  const auto around = habitat.neighborhood8(agent.pos);
  for (int d = 0; d < kDirections; ++d) {
    const Cell& c = habitat.at(around[d]);
    if (c.has_agent()) continue;
    const double w =
        pheromone_weight(habitat.pheromone(around[d]), p) * direction_weight(d - agent.heading, p);
    if (w <= 0.0) continue;
    table.entries[table.size++] = {around[d], d, w};
    total += w;
  }
  if (!(total > 0.0)) {
    table.size = 0;
    return table;
  }
  for (int i = 0; i < table.size; ++i) table.entries[i].probability /= total;
  return table;
}

// Samples one move. Returns false, leaving the agent in place, when no
// neighbour is admissible.
inline bool step_move(AntAgent& agent, Habitat& habitat, const AntParams& p, Rng& rng) {
  const TransitionTable table = transition_distribution(habitat, agent, p);
  if (table.empty()) return false;
  const double u = rng.uniform();
  double acc = 0.0;
  int chosen = table.size - 1;
  for (int i = 0; i < table.size; ++i) {
    acc += table.entries[i].probability;
    if (u < acc) {
      chosen = i;
      break;
    }
  }
  const TransitionEntry& e = table.entries[chosen];
  habitat.move_agent(agent.pos, e.cell);
  agent.pos = e.cell;
  agent.heading = e.direction;
  return true;
}

// Root-mean-square feature difference divided by d_max, clamped to [0, 1].
inline double normalized_distance(std::span<const double> a, std::span<const double> b,
                                  double d_max = 1.0) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("feature vectors must be non-empty and of equal length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  const double d = std::sqrt(acc / static_cast<double>(a.size())) / d_max;
  return std::clamp(d, 0.0, 1.0);
}

// Response threshold on the number of items around a site:
// n^m / (n^m + theta^m), m = resp_exponent (2 by default).
inline double chi(int n, const AntParams& p) {
  const double s = std::pow(static_cast<double>(n), p.resp_exponent);
  const double t = std::pow(p.theta_items, p.resp_exponent);
  return s / (s + t);
}

inline double drop_response(double d, const AntParams& p) {
  const double r = p.k1 / (p.k1 + d);
  return r * r;
}

inline double pick_response(double d, const AntParams& p) {
  const double r = d / (p.k2 + d);
  return r * r;
}

inline double pick_probability(double chi_val, double eps_val) { return (1.0 - chi_val) * eps_val; }
inline double drop_probability(double chi_val, double rho_val) { return chi_val * rho_val; }

inline bool votes_carry(int sum, int n, VoteRule rule) {
  return rule == VoteRule::kAtLeastHalf ? 2 * sum >= n : 2 * sum > n;
}

enum class VoteKind { kPick, kDrop };

struct VoteTally {
  int sum = 0;  // votes cast in favour
  int n = 0;    // neighbouring items polled
};

// One Bernoulli vote per neighbouring item, in neighbourhood order. The vote
// probability compares the focal item with that neighbour.
inline VoteTally cast_votes(const Habitat& habitat, Coord site, std::span<const double> focal,
                            std::span<const DataItem> items, VoteKind kind, const AntParams& p,
                            Rng& rng) {
  const auto around = habitat.neighborhood8(site);
  VoteTally tally;
  tally.n = habitat.count_items_around(site);
  const double chi_val = chi(tally.n, p);
  for (const Coord& q : around) {
    const Cell& c = habitat.at(q);
    if (!c.has_item()) continue;
    const double d =
        normalized_distance(focal, items[static_cast<std::size_t>(c.item)].features, p.d_max);
    const double prob = kind == VoteKind::kPick ? pick_probability(chi_val, pick_response(d, p))
                                                : drop_probability(chi_val, drop_response(d, p));
    if (rng.uniform() < prob) ++tally.sum;
  }
  return tally;
}

// Unladen agent on an item: poll the neighbours and pick the item up when
// the site is isolated or the votes carry.
inline bool try_pick(AntAgent& agent, Habitat& habitat, std::span<const DataItem> items,
                     const AntParams& p, Rng& rng) {
  if (agent.carrying) throw std::logic_error("try_pick called on a laden agent");
  const Cell& here = habitat.at(agent.pos);
  if (!here.has_item()) throw std::logic_error("try_pick called on an empty cell");
  const auto& focal = items[static_cast<std::size_t>(here.item)].features;
  const VoteTally t = cast_votes(habitat, agent.pos, focal, items, VoteKind::kPick, p, rng);
  if (t.n == 0 || votes_carry(t.sum, t.n, p.vote_rule)) {
    agent.carrying = habitat.take_item(agent.pos);
    return true;
  }
  return false;
}

// Laden agent on an empty cell. Never drops with no neighbouring items.
inline bool try_drop(AntAgent& agent, Habitat& habitat, std::span<const DataItem> items,
                     const AntParams& p, Rng& rng) {
  if (!agent.carrying) throw std::logic_error("try_drop called on an unladen agent");
  if (habitat.at(agent.pos).has_item()) throw std::logic_error("try_drop called on an occupied cell");
  const auto& focal = items[static_cast<std::size_t>(*agent.carrying)].features;
  const VoteTally t = cast_votes(habitat, agent.pos, focal, items, VoteKind::kDrop, p, rng);
  if (t.n >= 1 && votes_carry(t.sum, t.n, p.vote_rule)) {
    habitat.put_item(agent.pos, *agent.carrying);
    agent.carrying.reset();
    return true;
  }
  return false;
}

}  // namespace antlgp
