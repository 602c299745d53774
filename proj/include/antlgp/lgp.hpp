#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "antlgp/error.hpp"
#include "antlgp/random.hpp"

namespace antlgp::lgp {

// ---------------------------------------------------------------------------
// Genome
//
// Every instruction is one 32-bit block:
//   bits  0..7   opcode
//   bits  8..15  destination calculation register
//   bits 16..23  first operand
//   bits 24..31  second operand (ignored by unary opcodes)
// An operand byte holds its kind in the top two bits (0 register, 1 input,
// 2 constant) and the index in the low six.
// ---------------------------------------------------------------------------

enum class Opcode : std::uint8_t { kAdd = 0, kSub, kMul, kDiv, kAbs, kSqrt, kSin, kCos };
inline constexpr int kOpcodeCount = 8;

inline constexpr bool is_unary(Opcode op) { return op >= Opcode::kAbs; }

inline constexpr std::string_view opcode_name(Opcode op) {
  constexpr std::array<std::string_view, kOpcodeCount> names{"add", "sub", "mul", "div",
                                                            "abs", "sqrt", "sin", "cos"};
  return names[static_cast<std::size_t>(op)];
}

enum class OperandKind : std::uint8_t { kRegister = 0, kInput = 1, kConstant = 2 };

struct Operand {
  OperandKind kind = OperandKind::kRegister;
  std::uint8_t index = 0;

  std::uint8_t encode() const {
    return static_cast<std::uint8_t>((static_cast<unsigned>(kind) << 6) | (index & 0x3Fu));
  }
  static Operand decode(std::uint8_t b) {
    return {static_cast<OperandKind>(b >> 6), static_cast<std::uint8_t>(b & 0x3Fu)};
  }
  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
  Opcode op = Opcode::kAdd;
  std::uint8_t dst = 0;
  Operand src1;
  Operand src2;

  std::uint32_t encode() const {
    return static_cast<std::uint32_t>(op) | (static_cast<std::uint32_t>(dst) << 8) |
           (static_cast<std::uint32_t>(src1.encode()) << 16) |
           (static_cast<std::uint32_t>(src2.encode()) << 24);
  }
  static Instruction decode(std::uint32_t w) {
    return {static_cast<Opcode>(w & 0xFFu), static_cast<std::uint8_t>((w >> 8) & 0xFFu),
            Operand::decode(static_cast<std::uint8_t>((w >> 16) & 0xFFu)),
            Operand::decode(static_cast<std::uint8_t>((w >> 24) & 0xFFu))};
  }
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

inline constexpr int kMaxOperandIndex = 64;

// Register machine shape shared by every program of a run.
struct VmLayout {
  int n_inputs = 1;
  int n_registers = 8;
  int n_constants = 32;
  std::vector<Opcode> opcodes{Opcode::kAdd, Opcode::kSub, Opcode::kMul, Opcode::kDiv};

  void validate() const {
    if (n_inputs < 0 || n_inputs > kMaxOperandIndex) throw ConfigError("input count must be in [0, 64]");
    if (n_registers < 1 || n_registers > kMaxOperandIndex) {
      throw ConfigError("calculation register count must be in [1, 64]");
    }
    if (n_constants < 0 || n_constants > kMaxOperandIndex) {
      throw ConfigError("constant pool size must be in [0, 64]");
    }
    if (opcodes.empty()) throw ConfigError("function set is empty");
  }

  bool allows(Opcode op) const { return std::find(opcodes.begin(), opcodes.end(), op) != opcodes.end(); }

  bool legal(Operand o) const {
    switch (o.kind) {
      case OperandKind::kRegister: return o.index < n_registers;
      case OperandKind::kInput: return o.index < n_inputs;
      case OperandKind::kConstant: return o.index < n_constants;
    }
    return false;
  }

  bool decodable(std::uint32_t word) const {
    if ((word & 0xFFu) >= static_cast<std::uint32_t>(kOpcodeCount)) return false;
    const Instruction ins = Instruction::decode(word);
    if (!allows(ins.op) || ins.dst >= n_registers) return false;
    if (((word >> 22) & 0x3u) == 3u || !legal(ins.src1)) return false;
    if (is_unary(ins.op)) return ((word >> 30) & 0x3u) != 3u;
    return ((word >> 30) & 0x3u) != 3u && legal(ins.src2);
  }
};

struct Program {
  std::vector<std::uint32_t> code;
  std::vector<double> constants;

  std::size_t size() const { return code.size(); }
  friend bool operator==(const Program&, const Program&) = default;
};

inline bool decodable(const Program& p, const VmLayout& layout, std::size_t max_size) {
  if (p.code.empty() || p.code.size() > max_size) return false;
  if (p.constants.size() != static_cast<std::size_t>(layout.n_constants)) return false;
  return std::all_of(p.code.begin(), p.code.end(),
                     [&](std::uint32_t w) { return layout.decodable(w); });
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

inline constexpr double kProtectEpsilon = 1e-9;
inline constexpr double kValueLimit = 1e12;

inline double clamp_value(double v) {
  if (std::isfinite(v)) return v;
  return v > 0.0 ? kValueLimit : -kValueLimit;
}

// A program bound to a layout: operands resolved to offsets in one value
// bank laid out as [registers | inputs | constants].
class CompiledProgram {
 public:
  CompiledProgram(const Program& program, const VmLayout& layout)
      : n_registers_(layout.n_registers), n_inputs_(layout.n_inputs) {
    if (program.constants.size() != static_cast<std::size_t>(layout.n_constants)) {
      throw DecodeError("constant pool size does not match the layout");
    }
    ops_.reserve(program.code.size());
    for (std::size_t i = 0; i < program.code.size(); ++i) {
      const std::uint32_t w = program.code[i];
      if (!layout.decodable(w)) {
        throw DecodeError("instruction " + std::to_string(i) + " is not decodable");
      }
      const Instruction ins = Instruction::decode(w);
      ops_.push_back({ins.op, ins.dst, offset(ins.src1), offset(ins.src2)});
    }
    bank_.assign(static_cast<std::size_t>(layout.n_registers + layout.n_inputs), 0.0);
    bank_.insert(bank_.end(), program.constants.begin(), program.constants.end());
  }

  std::size_t n_inputs() const { return static_cast<std::size_t>(n_inputs_); }

  double operator()(std::span<const double> inputs) const {
    if (inputs.size() != static_cast<std::size_t>(n_inputs_)) {
      throw DecodeError("program expects " + std::to_string(n_inputs_) + " inputs, got " +
                        std::to_string(inputs.size()));
    }
    return run(inputs.data());
  }

  // Unchecked: `inputs` must point at n_inputs() values.
  double run(const double* inputs) const {
    double* bank = bank_.data();
    std::fill(bank, bank + n_registers_, 1.0);
    std::copy(inputs, inputs + n_inputs_, bank + n_registers_);
    for (const Op& o : ops_) {
      const double a = bank[o.a];
      const double b = bank[o.b];
      double r;
      switch (o.op) {
        case Opcode::kAdd: r = a + b; break;
        case Opcode::kSub: r = a - b; break;
        case Opcode::kMul: r = a * b; break;
        case Opcode::kDiv: r = std::abs(b) < kProtectEpsilon ? 1.0 : a / b; break;
        case Opcode::kAbs: r = std::abs(a); break;
        case Opcode::kSqrt: r = std::sqrt(std::abs(a)); break;
        case Opcode::kSin: r = std::sin(a); break;
        case Opcode::kCos: r = std::cos(a); break;
        default: r = a; break;
      }
      bank[o.dst] = clamp_value(r);
    }
    return bank[0];
  }

 private:
  struct Op {
    Opcode op;
    std::uint16_t dst;
    std::uint16_t a;
    std::uint16_t b;
  };

  std::uint16_t offset(Operand o) const {
    switch (o.kind) {
      case OperandKind::kRegister: return o.index;
      case OperandKind::kInput: return static_cast<std::uint16_t>(n_registers_ + o.index);
      case OperandKind::kConstant: return static_cast<std::uint16_t>(n_registers_ + n_inputs_ + o.index);
    }
    return 0;
  }

  int n_registers_;
  int n_inputs_;
  std::vector<Op> ops_;
  mutable std::vector<double> bank_;
};

inline double execute(const Program& program, const VmLayout& layout, std::span<const double> inputs) {
  return CompiledProgram(program, layout)(inputs);
}

// Supervised fitness cases stored row-major.
struct Cases {
  std::size_t n_inputs = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  std::span<const double> inputs(std::size_t i) const { return {x.data() + i * n_inputs, n_inputs}; }

  void add(std::span<const double> in, double target) {
    if (empty() && x.empty()) n_inputs = in.size();
    if (in.size() != n_inputs) throw std::invalid_argument("fitness case arity mismatch");
    x.insert(x.end(), in.begin(), in.end());
    y.push_back(target);
  }
};

inline std::vector<double> predict(const CompiledProgram& prog, const Cases& cases) {
  if (prog.n_inputs() != cases.n_inputs) throw DecodeError("case arity does not match the program");
  std::vector<double> out(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) out[i] = prog.run(cases.x.data() + i * cases.n_inputs);
  return out;
}

inline double fitness_rmse(const CompiledProgram& prog, const Cases& cases,
                           std::span<const std::uint32_t> subset = {}) {
  if (cases.empty()) throw std::invalid_argument("fitness needs at least one case");
  if (prog.n_inputs() != cases.n_inputs) throw DecodeError("case arity does not match the program");
  double acc = 0.0;
  auto one = [&](std::size_t i) {
    const double e = prog.run(cases.x.data() + i * cases.n_inputs) - cases.y[i];
    acc += e * e;
  };
  if (subset.empty()) {
    for (std::size_t i = 0; i < cases.size(); ++i) one(i);
    return std::sqrt(acc / static_cast<double>(cases.size()));
  }
  for (std::uint32_t i : subset) one(i);
  return std::sqrt(acc / static_cast<double>(subset.size()));
}

inline double fitness_rmse(const Program& p, const VmLayout& layout, const Cases& cases) {
  return fitness_rmse(CompiledProgram(p, layout), cases);
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty()) {
    throw std::invalid_argument("rmse needs equal, non-empty sequences");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Pearson product-moment correlation. Throws std::domain_error when either
// sequence has zero variance.
inline double correlation_coefficient(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty()) {
    throw std::invalid_argument("correlation needs equal, non-empty sequences");
  }
  const auto n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double ma = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp;
    const double da = actual[i] - ma;
    sxy += dp * da;
    sxx += dp * dp;
    syy += da * da;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw std::domain_error("correlation undefined for a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Variation
// ---------------------------------------------------------------------------

struct EvolutionConfig {
  std::size_t population_size = 500;
  std::size_t tournament_size = 4;
  std::size_t max_tournaments = 120'000;
  double mutation_freq = 0.9;
  double crossover_freq = 0.8;
  std::size_t n_demes = 10;
  std::size_t max_size = 512;
  std::size_t min_init = 4;
  std::size_t max_init = 32;
  std::size_t subset_size = 100;
  std::size_t max_segment = 16;
  int n_calc_registers = 8;
  int n_constants = 32;
  double constant_min = -1.0;
  double constant_max = 1.0;
  double constant_sigma = 0.1;
  std::vector<Opcode> opcodes{Opcode::kAdd, Opcode::kSub, Opcode::kMul, Opcode::kDiv};
  std::size_t migration_interval = 1000;
  std::size_t migration_count = 1;
  std::size_t history_every = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size == 0 || n_demes == 0 || population_size % n_demes != 0) {
      throw ConfigError("population size must be a positive multiple of the deme count");
    }
    if (tournament_size < 2 || tournament_size % 2 != 0) {
      throw ConfigError("tournament size must be even and at least 2");
    }
    if (population_size / n_demes < tournament_size) throw ConfigError("demes smaller than a tournament");
    if (subset_size < 1) throw ConfigError("subset size must be at least 1");
    if (max_segment < 1) throw ConfigError("crossover segment bound must be at least 1");
    if (max_size < 1 || min_init < 1 || min_init > max_init || max_init > max_size) {
      throw ConfigError("program size bounds must satisfy 1 <= min_init <= max_init <= max_size");
    }
    if (!(mutation_freq >= 0.0 && mutation_freq <= 1.0) || !(crossover_freq >= 0.0 && crossover_freq <= 1.0)) {
      throw ConfigError("operator frequencies must lie in [0, 1]");
    }
    if (!(constant_min <= constant_max)) throw ConfigError("constant range is empty");
    if (migration_interval < 1 || history_every < 1) throw ConfigError("intervals must be positive");
    if (migration_count >= population_size / n_demes) throw ConfigError("too many migrants per deme");
  }

  VmLayout layout(int n_inputs) const {
    VmLayout l{n_inputs, n_calc_registers, n_constants, opcodes};
    l.validate();
    return l;
  }
};

// Operand kind first (register, input, constant with equal odds among the
// kinds the layout has), then a uniform index within that kind.
inline Operand random_operand(const VmLayout& layout, Rng& rng) {
  std::array<OperandKind, 3> kinds{};
  std::size_t n = 0;
  kinds[n++] = OperandKind::kRegister;
  if (layout.n_inputs > 0) kinds[n++] = OperandKind::kInput;
  if (layout.n_constants > 0) kinds[n++] = OperandKind::kConstant;
  const OperandKind kind = kinds[rng.index(n)];
  int count = layout.n_registers;
  if (kind == OperandKind::kInput) count = layout.n_inputs;
  if (kind == OperandKind::kConstant) count = layout.n_constants;
  return {kind, static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(count)))};
}

inline Opcode random_opcode(const VmLayout& layout, Rng& rng) {
  return layout.opcodes[rng.index(layout.opcodes.size())];
}

inline std::uint8_t random_register(const VmLayout& layout, Rng& rng) {
  return static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(layout.n_registers)));
}

inline Instruction random_instruction(const VmLayout& layout, Rng& rng) {
  Instruction ins;
  ins.op = random_opcode(layout, rng);
  ins.dst = random_register(layout, rng);
  ins.src1 = random_operand(layout, rng);
  ins.src2 = random_operand(layout, rng);
  return ins;
}

inline Program random_program(const EvolutionConfig& cfg, const VmLayout& layout, Rng& rng) {
  Program p;
  const std::size_t len = cfg.min_init + rng.index(cfg.max_init - cfg.min_init + 1);
  p.code.reserve(len);
  for (std::size_t i = 0; i < len; ++i) p.code.push_back(random_instruction(layout, rng).encode());
  p.constants.resize(static_cast<std::size_t>(layout.n_constants));
  for (double& c : p.constants) c = rng.uniform(cfg.constant_min, cfg.constant_max);
  return p;
}

// Two-point crossover on instruction boundaries: one contiguous block of
// whole instructions (at most max_segment long) from each parent trades
// places. Segments are resampled until both children fit [1, max_size];
// after 32 failed draws the parents are returned unchanged.
inline std::pair<Program, Program> crossover(const Program& p1, const Program& p2, std::size_t max_size,
                                             Rng& rng, std::size_t max_segment = 16) {
  auto pick_segment = [&](std::size_t len) {
    const std::size_t start = rng.index(len + 1);
    const std::size_t count = rng.index(std::min(len - start, max_segment) + 1);
    return std::pair{start, count};
  };
  for (int attempt = 0; attempt < 32; ++attempt) {
    const auto [s1, n1] = pick_segment(p1.size());
    const auto [s2, n2] = pick_segment(p2.size());
    const std::size_t len1 = p1.size() - n1 + n2;
    const std::size_t len2 = p2.size() - n2 + n1;
    if (len1 < 1 || len1 > max_size || len2 < 1 || len2 > max_size) continue;

    auto splice = [](const Program& host, std::size_t hs, std::size_t hn, const Program& donor,
                     std::size_t ds, std::size_t dn) {
      Program child;
      child.constants = host.constants;
      child.code.reserve(host.size() - hn + dn);
      const auto h = host.code.begin();
      const auto d = donor.code.begin();
      child.code.insert(child.code.end(), h, h + static_cast<std::ptrdiff_t>(hs));
      child.code.insert(child.code.end(), d + static_cast<std::ptrdiff_t>(ds),
                        d + static_cast<std::ptrdiff_t>(ds + dn));
      child.code.insert(child.code.end(), h + static_cast<std::ptrdiff_t>(hs + hn), host.code.end());
      return child;
    };
    return {splice(p1, s1, n1, p2, s2, n2), splice(p2, s2, n2, p1, s1, n1)};
  }
  return {p1, p2};
}

enum class MutationKind { kField, kConstant, kInsert, kDelete };

// Re-randomises one field of one instruction. Acts inside the 32-bit block.
inline void mutate_field(Program& p, const VmLayout& layout, Rng& rng) {
  std::uint32_t& word = p.code[rng.index(p.code.size())];
  Instruction ins = Instruction::decode(word);
  switch (rng.below(4)) {
    case 0: ins.op = random_opcode(layout, rng); break;
    case 1: ins.dst = random_register(layout, rng); break;
    case 2: ins.src1 = random_operand(layout, rng); break;
    default: ins.src2 = random_operand(layout, rng); break;
  }
  word = ins.encode();
}

// One of field / constant / macro (insert or delete) with equal odds.
// Returns the kind actually applied after the size and pool guards.
inline MutationKind mutate(Program& p, const VmLayout& layout, std::size_t max_size, double constant_sigma,
                           Rng& rng, std::optional<MutationKind> forced = std::nullopt) {
  MutationKind kind;
  if (forced) {
    kind = *forced;
  } else {
    switch (rng.below(3)) {
      case 0: kind = MutationKind::kField; break;
      case 1: kind = MutationKind::kConstant; break;
      default: kind = rng.below(2) == 0 ? MutationKind::kInsert : MutationKind::kDelete; break;
    }
  }
  if (kind == MutationKind::kDelete && p.code.size() <= 1) kind = MutationKind::kField;
  if (kind == MutationKind::kInsert && p.code.size() >= max_size) kind = MutationKind::kField;
  if (kind == MutationKind::kConstant && p.constants.empty()) kind = MutationKind::kField;

  switch (kind) {
    case MutationKind::kField: mutate_field(p, layout, rng); break;
    case MutationKind::kConstant: p.constants[rng.index(p.constants.size())] += rng.normal(0.0, constant_sigma); break;
    case MutationKind::kInsert: {
      const std::size_t at = rng.index(p.code.size() + 1);
      p.code.insert(p.code.begin() + static_cast<std::ptrdiff_t>(at), random_instruction(layout, rng).encode());
      break;
    }
    case MutationKind::kDelete: p.code.erase(p.code.begin() + static_cast<std::ptrdiff_t>(rng.index(p.code.size()))); break;
  }
  return kind;
}

// ---------------------------------------------------------------------------
// Steady-state evolution in demes
// ---------------------------------------------------------------------------

struct Individual {
  Program program;
  double fitness = std::numeric_limits<double>::infinity();  // last subset RMSE
  bool evaluated = false;
};

using Deme = std::vector<Individual>;

struct TournamentLog {
  std::vector<std::size_t> contestants;  // deme indices, in draw order
  std::vector<double> fitness;           // per contestant
  std::vector<std::size_t> winners;      // best first
  std::vector<std::size_t> losers;
};

// Draws `k` distinct values from [0, n) by partial Fisher-Yates over `pool`.
inline void sample_subset(std::vector<std::uint32_t>& pool, std::size_t k, Rng& rng) {
  const std::size_t n = pool.size();
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(pool[i], pool[j]);
  }
}

inline TournamentLog tournament(Deme& deme, const Cases& cases, const EvolutionConfig& cfg,
                                const VmLayout& layout, Rng& rng,
                                std::vector<std::uint32_t>& case_pool) {
  if (deme.size() < cfg.tournament_size) throw std::invalid_argument("deme smaller than the tournament");
  TournamentLog log;
  std::vector<std::size_t> idx(deme.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < cfg.tournament_size; ++i) {
    const std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    log.contestants.push_back(idx[i]);
  }

  sample_subset(case_pool, cfg.subset_size, rng);
  const std::span<const std::uint32_t> subset(case_pool.data(), std::min(cfg.subset_size, case_pool.size()));
  for (std::size_t c : log.contestants) {
    Individual& ind = deme[c];
    ind.fitness = fitness_rmse(CompiledProgram(ind.program, layout), cases, subset);
    ind.evaluated = true;
    log.fitness.push_back(ind.fitness);
  }

  std::vector<std::size_t> rank(cfg.tournament_size);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return log.fitness[a] < log.fitness[b]; });
  const std::size_t half = cfg.tournament_size / 2;
  for (std::size_t i = 0; i < half; ++i) log.winners.push_back(log.contestants[rank[i]]);
  for (std::size_t i = half; i < cfg.tournament_size; ++i) log.losers.push_back(log.contestants[rank[i]]);

  // Winners pair up; copies of each pair replace the matching pair of losers.
  for (std::size_t i = 0; i < half; i += 2) {
    const bool paired = i + 1 < half;
    Program a = deme[log.winners[i]].program;
    Program b = paired ? deme[log.winners[i + 1]].program : Program{};
    if (paired && rng.bernoulli(cfg.crossover_freq)) {
      std::tie(a, b) = crossover(a, b, cfg.max_size, rng, cfg.max_segment);
    }
    if (rng.bernoulli(cfg.mutation_freq)) mutate(a, layout, cfg.max_size, cfg.constant_sigma, rng);
    deme[log.losers[i]] = Individual{std::move(a)};
    if (paired) {
      if (rng.bernoulli(cfg.mutation_freq)) mutate(b, layout, cfg.max_size, cfg.constant_sigma, rng);
      deme[log.losers[i + 1]] = Individual{std::move(b)};
    }
  }
  return log;
}

// Index of the individual with the lowest last-evaluated fitness (first
// such on ties; index 0 if none has been evaluated).
inline std::size_t best_of(const Deme& deme) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < deme.size(); ++i) {
    if (deme[i].fitness < deme[best].fitness) best = i;
  }
  return best;
}

// Ring migration: the best `migration_count` of deme i are copied into deme
// (i + 1) mod D over uniformly chosen individuals other than that deme's own
// best. Returns the number of individuals transferred.
inline std::size_t migrate(std::vector<Deme>& demes, const EvolutionConfig& cfg, Rng& rng) {
  const std::size_t d = demes.size();
  if (d < 2) return 0;
  std::vector<std::vector<Individual>> outgoing(d);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::size_t> order(demes[i].size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return demes[i][a].fitness < demes[i][b].fitness;
    });
    for (std::size_t m = 0; m < cfg.migration_count; ++m) outgoing[i].push_back(demes[i][order[m]]);
  }
  std::size_t moved = 0;
  for (std::size_t i = 0; i < d; ++i) {
    Deme& target = demes[(i + 1) % d];
    const std::size_t keep = best_of(target);
    for (Individual& migrant : outgoing[i]) {
      std::size_t slot = rng.index(target.size() - 1);
      if (slot >= keep) ++slot;
      target[slot] = std::move(migrant);
      ++moved;
    }
  }
  return moved;
}

struct HistoryRecord {
  std::size_t tournament = 0;
  double best_rmse = 0.0;
  double mean_rmse = 0.0;
  double mean_length = 0.0;
  double validation_rmse = 0.0;
};

struct EvolutionHistory {
  std::vector<HistoryRecord> records;
};

struct EvolutionResult {
  Program best;
  double best_validation_rmse = std::numeric_limits<double>::infinity();
  double best_train_rmse = std::numeric_limits<double>::infinity();
  EvolutionHistory history;
  VmLayout layout;
};

// Tournaments run round-robin over the demes; every `history_every`
// tournaments (and at 0) the population is scored on the full training set
// and the training-best is checked on the validation cases. The result is
// the checkpointed program with the lowest validation RMSE.
inline EvolutionResult evolve(const EvolutionConfig& cfg, const Cases& train, const Cases& validation) {
  cfg.validate();
  if (train.empty() || validation.empty()) throw std::invalid_argument("evolve needs training and validation cases");
  if (train.n_inputs != validation.n_inputs) throw std::invalid_argument("train/validation arity mismatch");
  const VmLayout layout = cfg.layout(static_cast<int>(train.n_inputs));

  std::vector<Rng> streams;
  std::vector<Deme> demes(cfg.n_demes);
  const std::size_t per_deme = cfg.population_size / cfg.n_demes;
  for (std::size_t d = 0; d < cfg.n_demes; ++d) {
    streams.emplace_back(derive_seed(cfg.seed, "lgp/deme/" + std::to_string(d)));
    for (std::size_t i = 0; i < per_deme; ++i) {
      demes[d].push_back(Individual{random_program(cfg, layout, streams[d])});
    }
  }
  Rng migration_rng(derive_seed(cfg.seed, "lgp/migration"));
  std::vector<std::uint32_t> case_pool(train.size());
  std::iota(case_pool.begin(), case_pool.end(), 0u);

  EvolutionResult result;
  result.layout = layout;
  auto checkpoint = [&](std::size_t t) {
    double best = std::numeric_limits<double>::infinity(), sum = 0.0, length = 0.0;
    const Program* best_prog = nullptr;
    for (const Deme& deme : demes) {
      for (const Individual& ind : deme) {
        const double f = fitness_rmse(CompiledProgram(ind.program, layout), train);
        sum += f;
        length += static_cast<double>(ind.program.size());
        if (f < best) {
          best = f;
          best_prog = &ind.program;
        }
      }
    }
    if (best_prog == nullptr) best_prog = &demes[0][0].program;
    const double val = fitness_rmse(CompiledProgram(*best_prog, layout), validation);
    const auto n = static_cast<double>(cfg.population_size);
    result.history.records.push_back({t, best, sum / n, length / n, val});
    if (val < result.best_validation_rmse || result.best.code.empty()) {
      result.best_validation_rmse = val;
      result.best_train_rmse = best;
      result.best = *best_prog;
    }
  };

  checkpoint(0);
  for (std::size_t t = 0; t < cfg.max_tournaments; ++t) {
    const std::size_t d = t % cfg.n_demes;
    tournament(demes[d], train, cfg, layout, streams[d], case_pool);
    const std::size_t done = t + 1;
    if (done % cfg.migration_interval == 0) migrate(demes, cfg, migration_rng);
    if (done % cfg.history_every == 0) checkpoint(done);
  }
  return result;
}

inline void write_history_csv(std::ostream& os, const EvolutionHistory& h) {
  os << "tournament,best_rmse,mean_rmse,mean_length,validation_rmse\n";
  os.precision(17);
  for (const HistoryRecord& r : h.records) {
    os << r.tournament << ',' << r.best_rmse << ',' << r.mean_rmse << ',' << r.mean_length << ','
       << r.validation_rmse << '\n';
  }
}

// ---------------------------------------------------------------------------
// Text form
//
//   inputs 4
//   registers 8
//   constants 2
//   c0 = 0x1.8p-1
//   c1 = -0x1p+0
//   r0 = r1 + in2
//   r3 = sqrt c1
// Constants are written as hex floats so the round trip is exact. Lines
// starting with '#' are comments.
// ---------------------------------------------------------------------------

inline std::string operand_text(Operand o) {
  switch (o.kind) {
    case OperandKind::kRegister: return "r" + std::to_string(o.index);
    case OperandKind::kInput: return "in" + std::to_string(o.index);
    case OperandKind::kConstant: return "c" + std::to_string(o.index);
  }
  return "?";
}

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string disassemble(const Instruction& ins) {
  static constexpr std::array<char, 4> sym{'+', '-', '*', '/'};
  std::string out = "r" + std::to_string(ins.dst) + " = ";
  if (is_unary(ins.op)) return out + std::string(opcode_name(ins.op)) + " " + operand_text(ins.src1);
  return out + operand_text(ins.src1) + " " + sym[static_cast<std::size_t>(ins.op)] + " " + operand_text(ins.src2);
}

inline void write_program(std::ostream& os, const Program& p, const VmLayout& layout) {
  os << "inputs " << layout.n_inputs << "\nregisters " << layout.n_registers << "\nconstants "
     << p.constants.size() << '\n';
  for (std::size_t i = 0; i < p.constants.size(); ++i) {
    os << 'c' << i << " = " << hexfloat(p.constants[i]) << '\n';
  }
  for (std::uint32_t w : p.code) os << disassemble(Instruction::decode(w)) << '\n';
}

struct ParsedProgram {
  Program program;
  VmLayout layout;
};

inline ParsedProgram read_program(std::istream& is, std::vector<Opcode> opcodes = {
                                                        Opcode::kAdd, Opcode::kSub, Opcode::kMul,
                                                        Opcode::kDiv, Opcode::kAbs, Opcode::kSqrt,
                                                        Opcode::kSin, Opcode::kCos}) {
  ParsedProgram out;
  out.layout.opcodes = std::move(opcodes);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw DecodeError("program line " + std::to_string(lineno) + ": " + why);
  };
  auto parse_operand = [&](const std::string& tok) {
    auto num = [&](std::size_t skip) {
      int v = -1;
      const auto* b = tok.data() + skip;
      const auto* e = tok.data() + tok.size();
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || ptr != e || v < 0 || v >= kMaxOperandIndex) fail("bad operand '" + tok + "'");
      return static_cast<std::uint8_t>(v);
    };
    if (tok.rfind("in", 0) == 0) return Operand{OperandKind::kInput, num(2)};
    if (tok.rfind("r", 0) == 0) return Operand{OperandKind::kRegister, num(1)};
    if (tok.rfind("c", 0) == 0) return Operand{OperandKind::kConstant, num(1)};
    fail("bad operand '" + tok + "'");
    return Operand{};
  };
  bool have_inputs = false, have_regs = false, have_consts = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.size() == 2 && tok[0] == "inputs") {
      out.layout.n_inputs = std::stoi(tok[1]);
      have_inputs = true;
    } else if (tok.size() == 2 && tok[0] == "registers") {
      out.layout.n_registers = std::stoi(tok[1]);
      have_regs = true;
    } else if (tok.size() == 2 && tok[0] == "constants") {
      out.layout.n_constants = std::stoi(tok[1]);
      out.program.constants.assign(static_cast<std::size_t>(out.layout.n_constants), 0.0);
      have_consts = true;
    } else if (tok.size() == 3 && tok[1] == "=" && tok[0][0] == 'c') {
      const Operand c = parse_operand(tok[0]);
      if (c.index >= out.program.constants.size()) fail("constant index out of range");
      char* end = nullptr;
      const double v = std::strtod(tok[2].c_str(), &end);
      if (end == tok[2].c_str() || *end != '\0') fail("bad constant '" + tok[2] + "'");
      out.program.constants[c.index] = v;
    } else if ((tok.size() == 5 || tok.size() == 4) && tok[1] == "=" && tok[0][0] == 'r') {
      Instruction ins;
      const Operand dst = parse_operand(tok[0]);
      if (dst.kind != OperandKind::kRegister) fail("destination must be a register");
      ins.dst = dst.index;
      if (tok.size() == 4) {
        bool found = false;
        for (int k = static_cast<int>(Opcode::kAbs); k < kOpcodeCount; ++k) {
          if (opcode_name(static_cast<Opcode>(k)) == tok[2]) {
            ins.op = static_cast<Opcode>(k);
            found = true;
          }
        }
        if (!found) fail("unknown unary op '" + tok[2] + "'");
        ins.src1 = parse_operand(tok[3]);
      } else {
        static constexpr std::string_view syms = "+-*/";
        if (tok[3].size() != 1 || syms.find(tok[3][0]) == std::string_view::npos) fail("unknown operator '" + tok[3] + "'");
        ins.op = static_cast<Opcode>(syms.find(tok[3][0]));
        ins.src1 = parse_operand(tok[2]);
        ins.src2 = parse_operand(tok[4]);
      }
      out.program.code.push_back(ins.encode());
    } else {
      fail("unrecognised line '" + line + "'");
    }
  }
  if (!have_inputs || !have_regs || !have_consts) throw DecodeError("program header incomplete");
  out.layout.validate();
  for (std::size_t i = 0; i < out.program.code.size(); ++i) {
    if (!out.layout.decodable(out.program.code[i])) {
      throw DecodeError("instruction " + std::to_string(i) + " does not fit the declared layout");
    }
  }
  if (out.program.code.empty()) throw DecodeError("program has no instructions");
  return out;
}

}  // namespace antlgp::lgp
