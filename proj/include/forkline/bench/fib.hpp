#pragma once

#include <cstdint>

#include "forkline/core/task.hpp"

namespace forkline::bench {

inline auto fib_serial(int n) -> std::int64_t {
  if (n < 2) {
    return n;
  }
  return fib_serial(n - 1) + fib_serial(n - 2);
}

inline auto fib(int n) -> task<std::int64_t> {
  if (n < 2) {
    co_return n;
  }
  std::int64_t a = 0;
  std::int64_t b = 0;
  co_await fork(&a, fib)(n - 1);
  co_await call(&b, fib)(n - 2);
  co_await join;
  co_return a + b;
}

} // namespace forkline::bench
