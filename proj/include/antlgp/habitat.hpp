#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace antlgp {

struct Coord {
  int x = 0;
  int y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Coord& c) {
  return os << '(' << c.x << ',' << c.y << ')';
}

using ItemId = std::int32_t;
using AgentId = std::int32_t;
inline constexpr std::int32_t kNone = -1;

// Compass directions, clockwise from north. North is y - 1.
inline constexpr int kDirections = 8;
inline constexpr std::array<Coord, kDirections> kDirectionOffsets{{
    {0, -1},   // N
    {1, -1},   // NE
    {1, 0},    // E
    {1, 1},    // SE
    {0, 1},    // S
    {-1, 1},   // SW
    {-1, 0},   // W
    {-1, -1},  // NW
}};

struct Cell {
  ItemId item = kNone;
  AgentId agent = kNone;

  bool has_item() const { return item != kNone; }
  bool has_agent() const { return agent != kNone; }
  std::optional<ItemId> item_id() const {
    return has_item() ? std::optional<ItemId>(item) : std::nullopt;
  }
  std::optional<AgentId> agent_id() const {
    return has_agent() ? std::optional<AgentId>(agent) : std::nullopt;
  }
};

// Toroidal grid with one item slot, one agent slot and one pheromone value
// per cell. Pheromone starts at zero and is never negative.
class Habitat {
 public:
  Habitat(int width, int height)
      : width_(width), height_(height) {
    if (width < 3 || height < 3) {
      throw std::invalid_argument("habitat dimensions must be at least 3x3, got " +
                                  std::to_string(width) + "x" + std::to_string(height));
    }
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    cells_.assign(n, Cell{});
    pheromone_.assign(n, 0.0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return cells_.size(); }

  Coord wrap(Coord p) const {
    auto mod = [](int v, int m) {
      const int r = v % m;
      return r < 0 ? r + m : r;
    };
    return {mod(p.x, width_), mod(p.y, height_)};
  }

  bool contains(Coord p) const {
    return p.x >= 0 && p.x < width_ && p.y >= 0 && p.y < height_;
  }

  std::size_t index(Coord p) const {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(p.x);
  }

  Coord coord(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
            static_cast<int>(idx / static_cast<std::size_t>(width_))};
  }

  // The eight wrapped neighbours in N, NE, E, SE, S, SW, W, NW order.
  std::array<Coord, kDirections> neighborhood8(Coord p) const {
    std::array<Coord, kDirections> out{};
    for (int d = 0; d < kDirections; ++d) {
      out[d] = wrap({p.x + kDirectionOffsets[d].x, p.y + kDirectionOffsets[d].y});
    }
    return out;
  }

  int count_items_around(Coord p) const {
    int n = 0;
    for (const Coord& q : neighborhood8(p)) n += at(q).has_item() ? 1 : 0;
    return n;
  }

  const Cell& at(Coord p) const { return cells_[index(p)]; }
  std::span<const Cell> cells() const { return cells_; }

  void put_item(Coord p, ItemId id) {
    Cell& c = cells_[index(p)];
    if (c.has_item()) throw std::logic_error("cell already holds an item");
    c.item = id;
  }
  ItemId take_item(Coord p) {
    Cell& c = cells_[index(p)];
    if (!c.has_item()) throw std::logic_error("no item to take");
    return std::exchange(c.item, kNone);
  }
  void put_agent(Coord p, AgentId id) {
    Cell& c = cells_[index(p)];
    if (c.has_agent()) throw std::logic_error("cell already holds an agent");
    c.agent = id;
  }
  void move_agent(Coord from, Coord to) {
    Cell& src = cells_[index(from)];
    Cell& dst = cells_[index(to)];
    if (!src.has_agent() || dst.has_agent()) throw std::logic_error("illegal agent move");
    dst.agent = std::exchange(src.agent, kNone);
  }

  std::size_t item_count() const {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return c.has_item(); }));
  }

  double pheromone(Coord p) const { return pheromone_[index(p)]; }
  std::span<const double> pheromone_field() const { return pheromone_; }

  void deposit(Coord p, double amount) {
    if (!(amount >= 0.0)) throw std::invalid_argument("pheromone deposit must be non-negative");
    pheromone_[index(p)] += amount;
  }

  // sigma <- (1 - K) sigma at every cell.
  void evaporate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw std::invalid_argument("evaporation rate must lie in [0, 1)");
    }
    const double keep = 1.0 - rate;
    for (double& s : pheromone_) s *= keep;
  }

 private:
  int width_;
  int height_;
  std::vector<Cell> cells_;
  std::vector<double> pheromone_;
};

// Pheromone amount laid at a site with n items around it: h + n / a.
inline double deposit_amount(double h, int n_items_around, double a) {
  return h + static_cast<double>(n_items_around) / a;
}

// Grid export: header "x,y,item_id,class_label", one row per item-occupied
// cell in row-major order. Unlabelled items leave class_label empty.
inline void write_grid_csv(std::ostream& os, const Habitat& habitat,
                           std::span<const std::optional<int>> labels) {
  os << "x,y,item_id,class_label\n";
  const auto cells = habitat.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].has_item()) continue;
    const Coord c = habitat.coord(i);
    os << c.x << ',' << c.y << ',' << cells[i].item << ',';
    const auto id = static_cast<std::size_t>(cells[i].item);
    if (id < labels.size() && labels[id]) os << *labels[id];
    os << '\n';
  }
}

// Binary PGM (P5) of the pheromone field, linearly scaled so the maximum maps
// to 255. An all-zero field renders black.
inline void write_pheromone_pgm(std::ostream& os, const Habitat& habitat) {
  const auto field = habitat.pheromone_field();
  const double peak = field.empty() ? 0.0 : *std::max_element(field.begin(), field.end());
  os << "P5\n" << habitat.width() << ' ' << habitat.height() << "\n255\n";
  for (double s : field) {
    const double v = peak > 0.0 ? std::round(255.0 * s / peak) : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
  }
}

}  // namespace antlgp
