#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace antlgp {

// One record to be clustered. Features are expected in [0, 1].
struct DataItem {
  std::vector<double> features;
  std::optional<int> true_label;
  std::size_t source_index = 0;
};

}  // namespace antlgp
