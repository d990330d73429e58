#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "forkline/core/task.hpp"

namespace forkline::bench {

inline constexpr std::size_t matmul_base = 32;

/// Dense row-major n×n matrix of doubles.
struct matrix {
  std::size_t n = 0;
  std::vector<double> data;

  matrix() = default;
  explicit matrix(std::size_t size) : n(size), data(size * size, 0.0) {}

  auto operator()(std::size_t i, std::size_t j) -> double& { return data[i * n + j]; }
  auto operator()(std::size_t i, std::size_t j) const -> double { return data[i * n + j]; }

  static auto identity(std::size_t size) -> matrix {
    matrix m(size);
    for (std::size_t i = 0; i < size; ++i) {
      m(i, i) = 1.0;
    }
    return m;
  }

  static auto random(std::size_t size, std::uint64_t seed) -> matrix {
    matrix m(size);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& x : m.data) {
      x = dist(rng);
    }
    return m;
  }
};

/// Square block of a row-major matrix.
struct block {
  double* p;
  std::size_t stride;

  [[nodiscard]] auto at(std::size_t i, std::size_t j) const -> double& { return p[i * stride + j]; }
  [[nodiscard]] auto quad(std::size_t r, std::size_t c, std::size_t half) const -> block {
    return {p + r * half * stride + c * half, stride};
  }
};

inline void validate_matmul(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("matmul: n must be a power of two");
  }
}

/// c = a·b by the textbook triple loop.
inline void multiply_serial(block c, block a, block b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0;
      for (std::size_t k = 0; k < n; ++k) {
        sum += a.at(i, k) * b.at(k, j);
      }
      c.at(i, j) = sum;
    }
  }
}

inline auto matmul_serial(matrix const& a, matrix const& b) -> matrix {
  matrix c(a.n);
  multiply_serial({c.data.data(), c.n}, {const_cast<double*>(a.data.data()), a.n},
                  {const_cast<double*>(b.data.data()), b.n}, a.n);
  return c;
}

/// c = a·b by quadrants: the four products into c, then the four into a
/// temporary that is added on.
inline auto multiply(block c, block a, block b, std::size_t n) -> task<void> {
  if (n <= matmul_base) {
    multiply_serial(c, a, b, n);
    co_return;
  }
  std::size_t const h = n / 2;
  co_await fork(multiply)(c.quad(0, 0, h), a.quad(0, 0, h), b.quad(0, 0, h), h);
  co_await fork(multiply)(c.quad(0, 1, h), a.quad(0, 0, h), b.quad(0, 1, h), h);
  co_await fork(multiply)(c.quad(1, 0, h), a.quad(1, 0, h), b.quad(0, 0, h), h);
  co_await call(multiply)(c.quad(1, 1, h), a.quad(1, 0, h), b.quad(0, 1, h), h);
  co_await join;

  std::unique_ptr<double[]> scratch(new double[n * n]);
  block t{scratch.get(), n};
  co_await fork(multiply)(t.quad(0, 0, h), a.quad(0, 1, h), b.quad(1, 0, h), h);
  co_await fork(multiply)(t.quad(0, 1, h), a.quad(0, 1, h), b.quad(1, 1, h), h);
  co_await fork(multiply)(t.quad(1, 0, h), a.quad(1, 1, h), b.quad(1, 0, h), h);
  co_await call(multiply)(t.quad(1, 1, h), a.quad(1, 1, h), b.quad(1, 1, h), h);
  co_await join;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c.at(i, j) += t.at(i, j);
    }
  }
}

} // namespace forkline::bench
