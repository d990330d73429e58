#pragma once

#include <cstdio>
#include <cstdlib>

// Runtime contract checks. Enabled in debug builds, or explicitly with
// FORKLINE_ENABLE_CHECKS=1 (the unit tests build this way).
#if !defined(FORKLINE_ENABLE_CHECKS)
#  if defined(NDEBUG)
#    define FORKLINE_ENABLE_CHECKS 0
#  else
#    define FORKLINE_ENABLE_CHECKS 1
#  endif
#endif

namespace forkline::detail {

[[noreturn]] inline void contract_failure(char const* expr, char const* msg, char const* file, int line) noexcept {
  std::fprintf(stderr, "forkline: contract violated: %s (%s) at %s:%d\n", msg, expr, file, line);
  std::fflush(stderr);
  std::abort();
}

} // namespace forkline::detail

#if FORKLINE_ENABLE_CHECKS
#  define FORKLINE_ASSERT(expr, msg)                                                                                   \
    do {                                                                                                               \
      if (!(expr)) [[unlikely]] {                                                                                      \
        ::forkline::detail::contract_failure(#expr, msg, __FILE__, __LINE__);                                          \
      }                                                                                                                \
    } while (false)
#else
#  define FORKLINE_ASSERT(expr, msg)                                                                                   \
    do {                                                                                                               \
    } while (false)
#endif

// Always-on check for conditions that must abort even in release builds.
#define FORKLINE_REQUIRE(expr, msg)                                                                                    \
  do {                                                                                                                 \
    if (!(expr)) [[unlikely]] {                                                                                        \
      ::forkline::detail::contract_failure(#expr, msg, __FILE__, __LINE__);                                            \
    }                                                                                                                  \
  } while (false)
