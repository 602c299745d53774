// Small end-to-end tour: sort a labelled fixture with the ant colony, then
// evolve a register program for a toy regression target.
#include <iostream>

#include "antlgp/pipeline.hpp"

int main() {
  using namespace antlgp;

  Rng rng(7);
  const auto items = synth_gaussian_classes(4, 50, 0.05, rng);

  ColonyConfig colony;
  colony.width = colony.height = 25;
  colony.n_ants = 15;
  colony.t_max = 100'000;
  colony.seed = 7;
  const auto sim = run(colony, items);
  const auto clusters = extract_clusters(sim.final_habitat, items.size(), 1);
  std::cout << "entropy " << sim.entropy_trace.front().second << " -> " << sim.entropy_trace.back().second << ", "
            << clusters.n_clusters << " clusters, purity " << purity(clusters, labels_of(items)) << "\n";

  const auto cases = synth_product_cases(100, rng);
  lgp::EvolutionConfig evo;
  evo.max_tournaments = 20'000;
  evo.seed = 7;
  const auto best = lgp::evolve(evo, cases, cases);
  std::cout << "best training RMSE " << best.best_train_rmse << "\n";
  for (std::uint32_t word : best.best.code) std::cout << "  " << lgp::disassemble(lgp::Instruction::decode(word)) << "\n";
}
