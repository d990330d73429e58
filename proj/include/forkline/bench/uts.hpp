#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "forkline/core/task.hpp"

namespace forkline::bench {

enum class uts_shape { geometric, binomial };

/// Unbalanced tree search parameters. Geometric trees draw each node's child
/// count from a geometric distribution with mean b up to depth d; binomial
/// trees give the root `root_children` children and every other node m
/// children with probability q.
struct uts_params {
  uts_shape shape = uts_shape::geometric;
  int d = 10;
  double b = 4;
  double q = 0.124875;
  int m = 8;
  std::uint64_t r = 19;
  int root_children = 2000;
  bool stack_alloc = true; // keep child counts on the task's stack rather than the heap
};

inline void validate_uts(uts_params const& p) {
  if (p.shape == uts_shape::geometric) {
    if (p.d < 0 || !(p.b > 0) || !std::isfinite(p.b)) {
      throw std::invalid_argument("uts: geometric trees need d >= 0 and b > 0");
    }
  } else {
    if (!(p.q >= 0) || p.q > 1 || p.m < 0 || p.root_children < 0) {
      throw std::invalid_argument("uts: binomial trees need 0 <= q <= 1, m >= 0");
    }
    if (p.q * p.m >= 1) {
      throw std::invalid_argument("uts: binomial trees with q*m >= 1 are unbounded in expectation");
    }
  }
}

/// Avalanche mix (splitmix64 finalizer); a bijection on 64-bit values.
constexpr auto mix64(std::uint64_t x) noexcept -> std::uint64_t {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr auto uts_root(std::uint64_t seed) noexcept -> std::uint64_t { return mix64(seed); }

constexpr auto uts_child(std::uint64_t state, std::uint64_t i) noexcept -> std::uint64_t { return mix64(state ^ (i + 1)); }

/// Uniform in [0, 1) from the top 53 bits of a node state.
constexpr auto uts_uniform(std::uint64_t state) noexcept -> double {
  return static_cast<double>(state >> 11) * 0x1.0p-53;
}

inline auto uts_children(uts_params const& p, std::uint64_t state, int depth) -> std::uint64_t {
  double const u = uts_uniform(state);
  if (p.shape == uts_shape::geometric) {
    if (depth >= p.d) {
      return 0;
    }
    double const success = 1.0 / (1.0 + p.b);
    return static_cast<std::uint64_t>(std::floor(std::log(1.0 - u) / std::log(1.0 - success)));
  }
  if (depth == 0) {
    return static_cast<std::uint64_t>(p.root_children);
  }
  return u < p.q ? static_cast<std::uint64_t>(p.m) : 0;
}

/// Self-describing parameter string for reports (no commas).
inline auto describe(uts_params const& p) -> std::string {
  std::string s;
  if (p.shape == uts_shape::geometric) {
    s = "shape=geometric;d=" + std::to_string(p.d) + ";b=" + std::to_string(p.b);
    s += ";children=floor(log(1-u)/log(1-1/(1+b)))";
  } else {
    s = "shape=binomial;q=" + std::to_string(p.q) + ";m=" + std::to_string(p.m) +
        ";root=" + std::to_string(p.root_children);
  }
  s += ";r=" + std::to_string(p.r) + ";stack_alloc=" + (p.stack_alloc ? "1" : "0");
  s += ";state=mix64(parent^(i+1));u=(state>>11)*2^-53";
  return s;
}

/// Node count by explicit depth-first traversal.
inline auto uts_serial(uts_params const& p) -> std::uint64_t {
  struct node {
    std::uint64_t state;
    int depth;
  };
  std::vector<node> todo{{uts_root(p.r), 0}};
  std::uint64_t count = 0;
  while (!todo.empty()) {
    node const n = todo.back();
    todo.pop_back();
    ++count;
    std::uint64_t const kids = uts_children(p, n.state, n.depth);
    for (std::uint64_t i = 0; i < kids; ++i) {
      todo.push_back({uts_child(n.state, i), n.depth + 1});
    }
  }
  return count;
}

inline auto uts_node(uts_params const* p, std::uint64_t state, int depth) -> task<std::uint64_t> {
  std::uint64_t const kids = uts_children(*p, state, depth);
  if (kids == 0) {
    co_return 1;
  }
  std::uint64_t* counts = nullptr;
  std::vector<std::uint64_t> heap;
  if (p->stack_alloc) {
    counts = co_await frame_alloc<std::uint64_t>(kids);
  } else {
    heap.assign(kids, 0);
    counts = heap.data();
  }
  for (std::uint64_t i = 0; i < kids; ++i) {
    co_await fork(&counts[i], uts_node)(p, uts_child(state, i), depth + 1);
  }
  co_await join;
  std::uint64_t total = 1;
  for (std::uint64_t i = 0; i < kids; ++i) {
    total += counts[i];
  }
  if (p->stack_alloc) {
    co_await frame_dealloc(counts, kids);
  }
  co_return total;
}

/// Node count; `p` must outlive the task.
inline auto uts(uts_params const* p) -> task<std::uint64_t> { return uts_node(p, uts_root(p->r), 0); }

} // namespace forkline::bench
