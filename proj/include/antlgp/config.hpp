#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "antlgp/colony.hpp"
#include "antlgp/error.hpp"
#include "antlgp/lgp.hpp"
#include "antlgp/random.hpp"

namespace antlgp {

struct MiningConfig {
  std::vector<std::string> cluster_columns{"requests", "bytes"};
  std::size_t horizon = 1;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  bool use_clusters = true;
  int link_radius = 1;
};

// Everything a command needs. Grid side 0 and n_ants < 0 mean "derive from
// the item count".
struct RunConfig {
  ColonyConfig colony;
  lgp::EvolutionConfig evolution;
  MiningConfig mining;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  RunConfig() {
    colony.width = 0;
    colony.height = 0;
    colony.n_ants = -1;
  }
};

// Module seeds are split from the master seed by tag:
//   colony    derive_seed(seed, "colony")
//   evolution derive_seed(seed, "evolution")
//   synth     derive_seed(seed, "synth")
inline std::uint64_t colony_seed(std::uint64_t master) { return derive_seed(master, "colony"); }
inline std::uint64_t evolution_seed(std::uint64_t master) { return derive_seed(master, "evolution"); }
inline std::uint64_t synth_seed(std::uint64_t master) { return derive_seed(master, "synth"); }

// Fills the automatic grid and ant settings for `n_items` and sets the
// colony seed from the master seed.
inline ColonyConfig resolve_colony(const RunConfig& cfg, std::size_t n_items) {
  ColonyConfig c = cfg.colony;
  if (c.width <= 0 || c.height <= 0) {
    const int side = default_grid_side(n_items);
    if (c.width <= 0) c.width = side;
    if (c.height <= 0) c.height = side;
  }
  if (c.n_ants < 0) c.n_ants = default_ant_count(static_cast<std::size_t>(c.width) * c.height);
  c.seed = colony_seed(cfg.seed);
  return c;
}

inline lgp::EvolutionConfig resolve_evolution(const RunConfig& cfg) {
  lgp::EvolutionConfig e = cfg.evolution;
  e.seed = evolution_seed(cfg.seed);
  return e;
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = static_cast<T>(std::strtod(value.c_str(), &end));
    if (value.empty() || *end != '\0') throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
  } else {
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || p != value.data() + value.size()) {
      throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    }
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Setting {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline lgp::Opcode opcode_from_name(const std::string& name) {
  for (int k = 0; k < lgp::kOpcodeCount; ++k) {
    if (lgp::opcode_name(static_cast<lgp::Opcode>(k)) == name) return static_cast<lgp::Opcode>(k);
  }
  throw ConfigError("unknown opcode '" + name + "'");
}

// The full key table. Every default is the value a RunConfig starts with.
inline const std::map<std::string, Setting>& settings() {
  static const std::map<std::string, Setting> table = [] {
    std::map<std::string, Setting> t;
    auto real = [&t](const std::string& key, auto member) {
      t[key] = {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<double>(key, v); },
                [member](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }};
    };
    auto integer = [&t](const std::string& key, auto member) {
      using T = std::remove_reference_t<decltype(member(std::declval<RunConfig&>()))>;
      t[key] = {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<T>(key, v); },
                [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
    };
    integer("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    t["out"] = {[](RunConfig& c, const std::string& v) { c.out_dir = v; },
                [](const RunConfig& c) { return c.out_dir; }};

    integer("colony.width", [](RunConfig& c) -> int& { return c.colony.width; });
    integer("colony.height", [](RunConfig& c) -> int& { return c.colony.height; });
    integer("colony.n_ants", [](RunConfig& c) -> int& { return c.colony.n_ants; });
    integer("colony.t_max", [](RunConfig& c) -> std::int64_t& { return c.colony.t_max; });
    integer("colony.entropy_block", [](RunConfig& c) -> int& { return c.colony.entropy_block; });
    integer("colony.conservation_every", [](RunConfig& c) -> std::int64_t& { return c.colony.conservation_every; });
    t["colony.snapshot_every"] = {
        [](RunConfig& c, const std::string& v) {
          const auto n = parse_number<std::int64_t>("colony.snapshot_every", v);
          c.colony.snapshot_every = n > 0 ? std::optional<std::int64_t>(n) : std::nullopt;
        },
        [](const RunConfig& c) { return std::to_string(c.colony.snapshot_every.value_or(0)); }};
    real("colony.beta", [](RunConfig& c) -> double& { return c.colony.params.beta; });
    real("colony.delta", [](RunConfig& c) -> double& { return c.colony.params.delta; });
    real("colony.eta", [](RunConfig& c) -> double& { return c.colony.params.eta; });
    real("colony.evaporation", [](RunConfig& c) -> double& { return c.colony.params.evaporation; });
    real("colony.a", [](RunConfig& c) -> double& { return c.colony.params.a; });
    real("colony.k1", [](RunConfig& c) -> double& { return c.colony.params.k1; });
    real("colony.k2", [](RunConfig& c) -> double& { return c.colony.params.k2; });
    real("colony.theta_items", [](RunConfig& c) -> double& { return c.colony.params.theta_items; });
    real("colony.resp_exponent", [](RunConfig& c) -> double& { return c.colony.params.resp_exponent; });
    real("colony.d_max", [](RunConfig& c) -> double& { return c.colony.params.d_max; });
    t["colony.dir_weights"] = {
        [](RunConfig& c, const std::string& v) {
          const auto parts = split_list(v);
          if (parts.size() != 5) throw ConfigError("colony.dir_weights needs 5 values");
          for (std::size_t i = 0; i < 5; ++i) c.colony.params.dir_weights[i] = parse_number<double>("colony.dir_weights", parts[i]);
        },
        [](const RunConfig& c) {
          std::vector<std::string> parts;
          for (double w : c.colony.params.dir_weights) parts.push_back(num(w));
          return join(parts);
        }};
    t["colony.vote_rule"] = {
        [](RunConfig& c, const std::string& v) {
          if (v == "at_least_half") c.colony.params.vote_rule = VoteRule::kAtLeastHalf;
          else if (v == "more_than_half") c.colony.params.vote_rule = VoteRule::kMoreThanHalf;
          else throw ConfigError("colony.vote_rule must be at_least_half or more_than_half");
        },
        [](const RunConfig& c) {
          return std::string(c.colony.params.vote_rule == VoteRule::kAtLeastHalf ? "at_least_half" : "more_than_half");
        }};

    integer("evolution.population_size", [](RunConfig& c) -> std::size_t& { return c.evolution.population_size; });
    integer("evolution.tournament_size", [](RunConfig& c) -> std::size_t& { return c.evolution.tournament_size; });
    integer("evolution.max_tournaments", [](RunConfig& c) -> std::size_t& { return c.evolution.max_tournaments; });
    real("evolution.mutation_freq", [](RunConfig& c) -> double& { return c.evolution.mutation_freq; });
    real("evolution.crossover_freq", [](RunConfig& c) -> double& { return c.evolution.crossover_freq; });
    integer("evolution.n_demes", [](RunConfig& c) -> std::size_t& { return c.evolution.n_demes; });
    integer("evolution.max_size", [](RunConfig& c) -> std::size_t& { return c.evolution.max_size; });
    integer("evolution.min_init", [](RunConfig& c) -> std::size_t& { return c.evolution.min_init; });
    integer("evolution.max_init", [](RunConfig& c) -> std::size_t& { return c.evolution.max_init; });
    integer("evolution.subset_size", [](RunConfig& c) -> std::size_t& { return c.evolution.subset_size; });
    integer("evolution.max_segment", [](RunConfig& c) -> std::size_t& { return c.evolution.max_segment; });
    integer("evolution.n_calc_registers", [](RunConfig& c) -> int& { return c.evolution.n_calc_registers; });
    integer("evolution.n_constants", [](RunConfig& c) -> int& { return c.evolution.n_constants; });
    real("evolution.constant_min", [](RunConfig& c) -> double& { return c.evolution.constant_min; });
    real("evolution.constant_max", [](RunConfig& c) -> double& { return c.evolution.constant_max; });
    real("evolution.constant_sigma", [](RunConfig& c) -> double& { return c.evolution.constant_sigma; });
    integer("evolution.migration_interval", [](RunConfig& c) -> std::size_t& { return c.evolution.migration_interval; });
    integer("evolution.migration_count", [](RunConfig& c) -> std::size_t& { return c.evolution.migration_count; });
    integer("evolution.history_every", [](RunConfig& c) -> std::size_t& { return c.evolution.history_every; });
    t["evolution.opcodes"] = {
        [](RunConfig& c, const std::string& v) {
          c.evolution.opcodes.clear();
          for (const auto& name : split_list(v)) c.evolution.opcodes.push_back(opcode_from_name(name));
        },
        [](const RunConfig& c) {
          std::vector<std::string> parts;
          for (auto op : c.evolution.opcodes) parts.emplace_back(lgp::opcode_name(op));
          return join(parts);
        }};

    t["mining.cluster_columns"] = {
        [](RunConfig& c, const std::string& v) { c.mining.cluster_columns = split_list(v); },
        [](const RunConfig& c) { return join(c.mining.cluster_columns); }};
    integer("mining.horizon", [](RunConfig& c) -> std::size_t& { return c.mining.horizon; });
    real("mining.train_fraction", [](RunConfig& c) -> double& { return c.mining.train_fraction; });
    real("mining.validation_fraction", [](RunConfig& c) -> double& { return c.mining.validation_fraction; });
    integer("mining.link_radius", [](RunConfig& c) -> int& { return c.mining.link_radius; });
    t["mining.use_clusters"] = {
        [](RunConfig& c, const std::string& v) { c.mining.use_clusters = parse_bool("mining.use_clusters", v); },
        [](const RunConfig& c) { return std::string(c.mining.use_clusters ? "true" : "false"); }};
    return t;
  }();
  return table;
}

}  // namespace detail

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = detail::settings();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

// `key = value` per line; '#' starts a comment.
inline void read_config(std::istream& is, RunConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto l = s.find_first_not_of(" \t\r");
      const auto r = s.find_last_not_of(" \t\r");
      return l == std::string::npos ? std::string{} : s.substr(l, r - l + 1);
    };
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig cfg;
  read_config(in, cfg);
  return cfg;
}

// Every key with its effective value, sorted by key.
inline std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, s] : detail::settings()) out += key + " = " + s.get(cfg) + "\n";
  return out;
}

// FNV-1a of the dump without the seed and output directory, as 16 hex digits.
inline std::string config_digest(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.seed = 0;
  c.out_dir.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(dump_config(c))));
  return buf;
}

}  // namespace antlgp
