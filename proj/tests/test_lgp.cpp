#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "antlgp/lgp.hpp"
#include "oracles.hpp"

using namespace antlgp;
using namespace antlgp::lgp;

namespace {

VmLayout small_layout(int inputs = 2) {
  VmLayout l;
  l.n_inputs = inputs;
  l.n_registers = 4;
  l.n_constants = 2;
  l.opcodes = {Opcode::kAdd, Opcode::kSub, Opcode::kMul, Opcode::kDiv, Opcode::kAbs, Opcode::kSqrt,
               Opcode::kSin, Opcode::kCos};
  return l;
}

Operand R(int i) { return {OperandKind::kRegister, static_cast<std::uint8_t>(i)}; }
Operand I(int i) { return {OperandKind::kInput, static_cast<std::uint8_t>(i)}; }
Operand C(int i) { return {OperandKind::kConstant, static_cast<std::uint8_t>(i)}; }

std::uint32_t ins(Opcode op, int dst, Operand a, Operand b = {}) {
  return Instruction{op, static_cast<std::uint8_t>(dst), a, b}.encode();
}

}  // namespace

TEST(Encoding, RoundTrip) {
  Rng rng(1);
  const VmLayout l = small_layout();
  for (int i = 0; i < 1000; ++i) {
    const Instruction a = random_instruction(l, rng);
    EXPECT_EQ(Instruction::decode(a.encode()), a);
    EXPECT_TRUE(l.decodable(a.encode()));
  }
}

TEST(Encoding, RejectsIllegalWords) {
  VmLayout l = small_layout();
  l.opcodes = {Opcode::kAdd, Opcode::kMul};
  EXPECT_FALSE(l.decodable(ins(Opcode::kSub, 0, R(0), R(1))));  // not in the function set
  EXPECT_FALSE(l.decodable(ins(Opcode::kAdd, 4, R(0), R(1))));  // dst out of range
  EXPECT_FALSE(l.decodable(ins(Opcode::kAdd, 0, I(2), R(1))));  // input out of range
  EXPECT_FALSE(l.decodable(ins(Opcode::kAdd, 0, R(0), C(2))));  // constant out of range
  EXPECT_FALSE(l.decodable(0xFFu));                             // opcode byte out of range
  EXPECT_FALSE(l.decodable(ins(Opcode::kAdd, 0, R(0), R(0)) | (0xC0u << 16)));  // kind 3
}

TEST(Interpreter, RegistersStartAtOne) {
  const VmLayout l = small_layout();
  Program p{{ins(Opcode::kAdd, 0, R(0), R(1))}, {0.0, 0.0}};
  const double x[2] = {5, 7};
  EXPECT_EQ(execute(p, l, x), 2.0);
}

TEST(Interpreter, ArithmeticAndUnary) {
  const VmLayout l = small_layout();
  // r1 = in0 * in1; r2 = r1 - c0; r0 = r2 / c1; r3 = sqrt in0 (dead)
  Program p{{ins(Opcode::kMul, 1, I(0), I(1)), ins(Opcode::kSub, 2, R(1), C(0)), ins(Opcode::kDiv, 0, R(2), C(1)),
             ins(Opcode::kSqrt, 3, I(0))},
            {1.5, 4.0}};
  const double x[2] = {3, -2};
  EXPECT_DOUBLE_EQ(execute(p, l, x), (3.0 * -2.0 - 1.5) / 4.0);
  Program u{{ins(Opcode::kAbs, 1, I(1)), ins(Opcode::kSqrt, 2, R(1)), ins(Opcode::kCos, 3, I(0)),
             ins(Opcode::kSin, 0, R(2)), ins(Opcode::kAdd, 0, R(0), R(3))},
            {0, 0}};
  EXPECT_DOUBLE_EQ(execute(u, l, x), std::sin(std::sqrt(2.0)) + std::cos(3.0));
}

TEST(Interpreter, ProtectedDivisionAndClamp) {
  const VmLayout l = small_layout();
  Program div0{{ins(Opcode::kDiv, 0, I(0), I(1))}, {0, 0}};
  const double zero[2] = {5, 0};
  const double tiny[2] = {5, 1e-10};
  EXPECT_EQ(execute(div0, l, zero), 1.0);
  EXPECT_EQ(execute(div0, l, tiny), 1.0);
  Program big{{ins(Opcode::kMul, 0, I(0), I(0))}, {0, 0}};
  const double huge[2] = {1e200, 0};
  EXPECT_EQ(execute(big, l, huge), kValueLimit);
  // finite values past the limit are left alone
  Program bigger{{ins(Opcode::kMul, 0, I(0), I(0)), ins(Opcode::kMul, 0, R(0), R(0))}, {0, 0}};
  EXPECT_EQ(execute(bigger, l, huge), 1e24);
  const double nhuge[2] = {-1e300, 1e300};
  Program neg{{ins(Opcode::kMul, 0, I(0), I(1))}, {0, 0}};
  EXPECT_EQ(execute(neg, l, nhuge), -kValueLimit);
}

TEST(Interpreter, ArityChecked) {
  const VmLayout l = small_layout();
  Program p{{ins(Opcode::kAdd, 0, I(0), I(1))}, {0, 0}};
  const double one[1] = {1};
  EXPECT_THROW(execute(p, l, std::span<const double>(one, 1)), DecodeError);
  Program bad{{ins(Opcode::kAdd, 9, I(0), I(1))}, {0, 0}};
  const double two[2] = {1, 2};
  EXPECT_THROW(execute(bad, l, two), DecodeError);
}

TEST(Metrics, RmseAndCorrelation) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 2, 3, 4, 5};
  EXPECT_EQ(rmse(a, b), 0.0);
  EXPECT_DOUBLE_EQ(correlation_coefficient(a, b), 1.0);
  const std::vector<double> off{6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(rmse(a, off), 5.0);
  const std::vector<double> p{0, 0}, q{5, 0};
  EXPECT_DOUBLE_EQ(rmse(p, q), std::sqrt(12.5));
  const std::vector<double> x{1, 2, 3}, y{2, 4, 7};
  EXPECT_NEAR(correlation_coefficient(x, y), oracle::pearson(x, y), 1e-12);
  EXPECT_NEAR(correlation_coefficient(x, y), 0.9934, 1e-4);
  const std::vector<double> flat{2, 2, 2};
  EXPECT_THROW(correlation_coefficient(flat, y), std::domain_error);
}

TEST(Variation, CrossoverKeepsBlocksWhole) {
  EvolutionConfig cfg;
  const VmLayout l = cfg.layout(3);
  Rng rng(5);
  for (int i = 0; i < 10'000; ++i) {
    const Program a = random_program(cfg, l, rng);
    const Program b = random_program(cfg, l, rng);
    const auto [c1, c2] = crossover(a, b, 40, rng, cfg.max_segment);
    ASSERT_TRUE(decodable(c1, l, 40));
    ASSERT_TRUE(decodable(c2, l, 40));
    EXPECT_EQ(c1.size() + c2.size(), a.size() + b.size());
    // every child word comes from one of the parents
    for (auto w : c1.code)
      ASSERT_TRUE(std::find(a.code.begin(), a.code.end(), w) != a.code.end() ||
                  std::find(b.code.begin(), b.code.end(), w) != b.code.end());
  }
}

TEST(Variation, CrossoverAtSizeBound) {
  EvolutionConfig cfg;
  cfg.min_init = cfg.max_init = 10;
  const VmLayout l = cfg.layout(1);
  Rng rng(2);
  const Program a = random_program(cfg, l, rng);
  const Program b = random_program(cfg, l, rng);
  for (int i = 0; i < 1000; ++i) {
    const auto [c1, c2] = crossover(a, b, 10, rng);
    EXPECT_EQ(c1.size(), 10u);
    EXPECT_EQ(c2.size(), 10u);
  }
}

TEST(Variation, MutationStaysDecodable) {
  EvolutionConfig cfg;
  const VmLayout l = cfg.layout(4);
  Rng rng(6);
  Program p = random_program(cfg, l, rng);
  int kinds[4] = {0, 0, 0, 0};
  for (int i = 0; i < 10'000; ++i) {
    const auto k = mutate(p, l, 48, cfg.constant_sigma, rng);
    ++kinds[static_cast<int>(k)];
    ASSERT_TRUE(decodable(p, l, 48));
  }
  for (int k : kinds) EXPECT_GT(k, 0);
}

TEST(Variation, MutationGuards) {
  EvolutionConfig cfg;
  const VmLayout l = cfg.layout(1);
  Rng rng(7);
  Program one{{random_instruction(l, rng).encode()}, std::vector<double>(32, 0.0)};
  EXPECT_EQ(mutate(one, l, 8, 0.1, rng, MutationKind::kDelete), MutationKind::kField);
  EXPECT_EQ(one.size(), 1u);
  Program full = one;
  full.code.assign(8, one.code[0]);
  EXPECT_EQ(mutate(full, l, 8, 0.1, rng, MutationKind::kInsert), MutationKind::kField);
  EXPECT_EQ(full.size(), 8u);
}

TEST(ProgramText, RoundTripPreservesBehaviour) {
  EvolutionConfig cfg;
  cfg.opcodes = small_layout().opcodes;
  const VmLayout l = cfg.layout(3);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Program p = random_program(cfg, l, rng);
    std::stringstream ss;
    write_program(ss, p, l);
    const auto back = read_program(ss);
    EXPECT_EQ(back.layout.n_inputs, 3);
    EXPECT_EQ(back.program.constants, p.constants);
    ASSERT_EQ(back.program.size(), p.size());
    const double x[3] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    EXPECT_EQ(execute(back.program, back.layout, x), execute(p, l, x));
  }
}

TEST(ProgramText, Disassembly) {
  EXPECT_EQ(disassemble(Instruction::decode(ins(Opcode::kAdd, 0, R(1), I(2)))), "r0 = r1 + in2");
  EXPECT_EQ(disassemble(Instruction::decode(ins(Opcode::kSqrt, 3, C(1)))), "r3 = sqrt c1");
  std::istringstream bad("inputs 1\nregisters 2\nconstants 0\nr0 = r1 ^ in0\n");
  EXPECT_THROW(read_program(bad), DecodeError);
}

TEST(Evolution, ConfigValidation) {
  EvolutionConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.population_size = 505;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tournament_size = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Evolution, ZeroTournamentsIsRandomSearch) {
  EvolutionConfig cfg;
  cfg.population_size = 40;
  cfg.n_demes = 4;
  cfg.max_tournaments = 0;
  Cases c;
  for (int i = 0; i < 10; ++i) {
    const double x[1] = {static_cast<double>(i)};
    c.add(x, 2.0 * i);
  }
  const auto r = evolve(cfg, c, c);
  ASSERT_EQ(r.history.records.size(), 1u);
  EXPECT_EQ(r.history.records[0].tournament, 0u);
  EXPECT_EQ(r.best_train_rmse, r.history.records[0].best_rmse);
}

TEST(Evolution, HistoryLengthAndDeterminism) {
  EvolutionConfig cfg;
  cfg.population_size = 40;
  cfg.n_demes = 4;
  cfg.max_tournaments = 3000;
  cfg.history_every = 500;
  cfg.seed = 11;
  Rng rng(1);
  Cases c;
  for (int i = 0; i < 30; ++i) {
    const double x[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    c.add(x, x[0] + x[1]);
  }
  const auto a = evolve(cfg, c, c);
  const auto b = evolve(cfg, c, c);
  EXPECT_EQ(a.history.records.size(), 7u);
  std::ostringstream ha, hb;
  write_history_csv(ha, a.history);
  write_history_csv(hb, b.history);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(a.best, b.best);
  // best-so-far never gets worse on the checkpoints it was chosen from
  EXPECT_LE(a.best_validation_rmse, a.history.records.front().validation_rmse);
}

TEST(Evolution, SolvesLinearTarget) {
  EvolutionConfig cfg;
  cfg.population_size = 100;
  cfg.n_demes = 5;
  cfg.max_tournaments = 20'000;
  cfg.seed = 3;
  Rng rng(2);
  Cases c;
  for (int i = 0; i < 50; ++i) {
    const double x[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    c.add(x, x[0] - x[1]);
  }
  const auto r = evolve(cfg, c, c);
  EXPECT_LT(r.best_train_rmse, 1e-9);
  EXPECT_LT(fitness_rmse(r.best, r.layout, c), 1e-9);
}
