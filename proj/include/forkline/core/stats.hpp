#pragma once

#include <atomic>
#include <cstdint>

namespace forkline {

/// Plain snapshot of the runtime's protocol counters.
struct stats_snapshot {
  std::uint64_t steals = 0;
  std::uint64_t join_resets = 0;
  std::uint64_t balance_mismatches = 0;
  std::uint64_t adoptions = 0;
  std::uint64_t adoption_violations = 0;
  std::uint64_t owner_violations = 0;
  std::uint64_t sleeps = 0;
  std::uint64_t greedy_violations = 0;
  std::uint64_t wakeups = 0;
  std::uint64_t migrations = 0;
};

/// Process-wide protocol counters. Only slow paths touch these (steals, join
/// reconciliation, stack adoption, sleeping), never the fork/return fast path.
class runtime_stats {
 public:
  std::atomic<std::uint64_t> steals = 0;
  std::atomic<std::uint64_t> join_resets = 0;
  std::atomic<std::uint64_t> balance_mismatches = 0; // steals != stranded-child decrements at a reset
  std::atomic<std::uint64_t> adoptions = 0;
  std::atomic<std::uint64_t> adoption_violations = 0; // adopter's previous stack was not empty
  std::atomic<std::uint64_t> owner_violations = 0;    // adopted a stack some worker still held
  std::atomic<std::uint64_t> sleeps = 0;
  std::atomic<std::uint64_t> greedy_violations = 0; // went to sleep holding local work
  std::atomic<std::uint64_t> wakeups = 0;
  std::atomic<std::uint64_t> migrations = 0;

  static auto instance() noexcept -> runtime_stats& {
    static runtime_stats s;
    return s;
  }

  static void bump(std::atomic<std::uint64_t>& c) noexcept { c.fetch_add(1, std::memory_order_relaxed); }

  [[nodiscard]] auto snapshot() const noexcept -> stats_snapshot {
    auto ld = [](std::atomic<std::uint64_t> const& c) { return c.load(std::memory_order_relaxed); };
    return {ld(steals),   ld(join_resets),       ld(balance_mismatches), ld(adoptions), ld(adoption_violations),
            ld(owner_violations), ld(sleeps), ld(greedy_violations), ld(wakeups),  ld(migrations)};
  }

  void reset() noexcept {
    for (auto* c : {&steals, &join_resets, &balance_mismatches, &adoptions, &adoption_violations, &owner_violations,
                    &sleeps, &greedy_violations, &wakeups, &migrations}) {
      c->store(0, std::memory_order_relaxed);
    }
  }
};

inline auto stats() noexcept -> runtime_stats& { return runtime_stats::instance(); }

} // namespace forkline
