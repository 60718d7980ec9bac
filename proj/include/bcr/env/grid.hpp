#pragma once

#include <array>

namespace bcr::env {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Shared movement action indices. Up decreases the row.
enum Move : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

inline Cell step_cell(Cell c, int move) {
  static constexpr std::array<std::array<int, 2>, 4> kDelta{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  return Cell{c.row + kDelta[move][0], c.col + kDelta[move][1]};
}

}  // namespace bcr::env
