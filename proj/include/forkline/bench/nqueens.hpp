#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

#include "forkline/core/task.hpp"

namespace forkline::bench {

inline constexpr int nqueens_max = 16;

using board = std::array<std::int8_t, nqueens_max>;

inline void validate_nqueens(int n) {
  if (n < 1 || n > nqueens_max) {
    throw std::invalid_argument("nqueens: n must be in [1, 16]");
  }
}

/// Can a queen go at (row, col) given queens in rows [0, row)?
inline auto queen_fits(board const& b, int row, int col) -> bool {
  for (int r = 0; r < row; ++r) {
    int const c = b[static_cast<std::size_t>(r)];
    if (c == col || c - col == row - r || col - c == row - r) {
      return false;
    }
  }
  return true;
}

inline auto nqueens_serial(int n, int row, board& b) -> std::int64_t {
  if (row == n) {
    return 1;
  }
  std::int64_t total = 0;
  for (int col = 0; col < n; ++col) {
    if (queen_fits(b, row, col)) {
      b[static_cast<std::size_t>(row)] = static_cast<std::int8_t>(col);
      total += nqueens_serial(n, row + 1, b);
    }
  }
  return total;
}

inline auto nqueens_serial(int n) -> std::int64_t {
  board b{};
  return nqueens_serial(n, 0, b);
}

/// Counts completions of a board with `row` queens placed. Child counts live
/// in a buffer on the task's own stack.
inline auto nqueens_from(int n, int row, board b) -> task<std::int64_t> {
  if (row == n) {
    co_return 1;
  }
  auto const width = static_cast<std::size_t>(n);
  std::int64_t* counts = co_await frame_alloc<std::int64_t>(width);
  for (int col = 0; col < n; ++col) {
    if (queen_fits(b, row, col)) {
      board next = b;
      next[static_cast<std::size_t>(row)] = static_cast<std::int8_t>(col);
      co_await fork(&counts[col], nqueens_from)(n, row + 1, next);
    }
  }
  co_await join;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < width; ++i) {
    total += counts[i];
  }
  co_await frame_dealloc(counts, width);
  co_return total;
}

inline auto nqueens(int n) -> task<std::int64_t> { return nqueens_from(n, 0, board{}); }

} // namespace forkline::bench
