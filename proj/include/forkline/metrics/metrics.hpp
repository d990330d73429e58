#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "forkline/core/stack.hpp"

namespace forkline {

/// Wall times of one benchmark configuration, in any common unit.
struct timing_record {
  double serial = 0;   // serial projection: fork/call/join removed
  double one = 0;      // single-worker pool
  double parallel = 0; // `threads`-worker pool
  std::size_t threads = 1;
};

/// Peak frame memory at P workers against the single-worker peak.
struct mem_record {
  std::size_t threads = 1;
  std::size_t m1 = 0;
  std::size_t mp = 0;
  std::size_t metadata = segmented_stack::metadata_bytes;
};

/// Ts / Tp.
inline auto speedup(timing_record const& r) -> double {
  if (!(r.serial > 0) || !(r.parallel > 0)) {
    throw std::invalid_argument("speedup: times must be positive");
  }
  return r.serial / r.parallel;
}

/// Speedup per worker.
inline auto efficiency(timing_record const& r) -> double {
  if (r.threads == 0) {
    throw std::invalid_argument("efficiency: need at least one worker");
  }
  return speedup(r) / static_cast<double>(r.threads);
}

/// Ceiling on the frame memory of P workers whose single-worker run peaks at
/// m1 bytes, with `metadata` bytes of bookkeeping per stacklet: (2c + 3)·P·M1.
constexpr auto parallel_stack_bound(std::size_t threads, std::size_t m1, std::size_t metadata) -> std::size_t {
  return (2 * metadata + 3) * threads * m1;
}

inline auto within_parallel_bound(mem_record const& r) -> bool {
  return r.mp <= parallel_stack_bound(r.threads, r.m1, r.metadata);
}

/// Highest frame memory held at once by all workers since the last reset.
inline auto peak_frame_memory() noexcept -> std::size_t { return frame_memory::peak(); }

struct mem_point {
  double threads = 1;
  double m1 = 0;
  double mrss = 0;
};

/// mrss ≈ a + b·m1·threadsⁿ
struct power_law_fit {
  double a = 0;
  double b = 0;
  double n = 0;
  double sse = 0;
  double n_stderr = 0;
};

namespace detail {

struct linear_fit {
  double a = 0;
  double b = 0;
  double sse = 0;
};

inline auto fit_linear_at(std::span<mem_point const> pts, double n) -> linear_fit {
  auto const count = static_cast<double>(pts.size());
  double xm = 0;
  double ym = 0;
  for (auto const& p : pts) {
    xm += p.m1 * std::pow(p.threads, n);
    ym += p.mrss;
  }
  xm /= count;
  ym /= count;
  double sxx = 0;
  double sxy = 0;
  for (auto const& p : pts) {
    double const dx = p.m1 * std::pow(p.threads, n) - xm;
    sxx += dx * dx;
    sxy += dx * (p.mrss - ym);
  }
  linear_fit f;
  if (sxx > 0 && sxx > 1e-24 * xm * xm * count) {
    f.b = sxy / sxx;
  }
  f.a = ym - f.b * xm;
  for (auto const& p : pts) {
    double const r = p.mrss - f.a - f.b * p.m1 * std::pow(p.threads, n);
    f.sse += r * r;
  }
  return f;
}

} // namespace detail

/// Least-squares fit of mrss ≈ a + b·m1·threadsⁿ by grid search over
/// n ∈ [0, 2] (step 0.001) with (a, b) solved exactly at every n. Ties keep
/// the smaller exponent. The uncertainty comes from the curvature of the
/// residual sum of squares at the optimum.
inline auto fit_power_law(std::span<mem_point const> pts) -> power_law_fit {
  if (pts.size() < 4) {
    throw std::invalid_argument("fit_power_law: need at least 4 points");
  }
  std::set<double> distinct;
  for (auto const& p : pts) {
    if (!(p.threads > 0) || !(p.m1 > 0)) {
      throw std::invalid_argument("fit_power_law: threads and m1 must be positive");
    }
    distinct.insert(p.threads);
  }
  if (distinct.size() < 3) {
    throw std::invalid_argument("fit_power_law: need at least 3 distinct worker counts");
  }

  constexpr int steps = 2000;
  constexpr double h = 2.0 / steps;
  std::vector<detail::linear_fit> grid(steps + 1);
  std::size_t best = 0;
  for (int i = 0; i <= steps; ++i) {
    grid[static_cast<std::size_t>(i)] = detail::fit_linear_at(pts, i * h);
    if (grid[static_cast<std::size_t>(i)].sse < grid[best].sse) {
      best = static_cast<std::size_t>(i);
    }
  }

  power_law_fit out;
  out.n = static_cast<double>(best) * h;
  out.a = grid[best].a;
  out.b = grid[best].b;
  out.sse = grid[best].sse;

  std::size_t const mid = std::clamp<std::size_t>(best, 1, steps - 1);
  double const curvature = (grid[mid + 1].sse - 2 * grid[mid].sse + grid[mid - 1].sse) / (h * h);
  double const dof = static_cast<double>(pts.size()) - 3;
  if (dof <= 0 || !(curvature > 0)) {
    out.n_stderr = out.sse == 0 ? 0 : std::numeric_limits<double>::infinity();
  } else {
    out.n_stderr = std::sqrt(2 * (out.sse / dof) / curvature);
  }
  return out;
}

inline auto fit_power_law(std::vector<mem_point> const& pts) -> power_law_fit {
  return fit_power_law(std::span<mem_point const>(pts));
}

} // namespace forkline
