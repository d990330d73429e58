#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "forkline/core/stack.hpp"

using forkline::segmented_stack;
using forkline::segmented_stack_bound;

TEST(SegmentedStack, FreshStackHasOneStacklet) {
  segmented_stack s;
  EXPECT_TRUE(s.empty());
  auto m = s.metrics();
  EXPECT_EQ(m.stacklets, 1U);
  EXPECT_EQ(m.footprint_bytes, 4096U + 48U);
  EXPECT_EQ(m.live_bytes, 0U);
  EXPECT_EQ(segmented_stack::metadata_bytes, 48U);
}

TEST(SegmentedStack, AllocationsAreAlignedAndRounded) {
  segmented_stack s;
  void* a = s.allocate(1);
  void* b = s.allocate(17);
  EXPECT_EQ(reinterpret_cast<std::uintptr_t>(a) % 16, 0U);
  EXPECT_EQ(static_cast<std::byte*>(b) - static_cast<std::byte*>(a), 16);
  EXPECT_EQ(s.metrics().live_bytes, 16U + 32U);
  EXPECT_EQ(segmented_stack::round_up(0), 16U);
  s.deallocate(b, 17);
  s.deallocate(a, 1);
  EXPECT_TRUE(s.empty());
}

TEST(SegmentedStack, OversizedRequestGetsItsOwnStacklet) {
  segmented_stack s;
  void* p = s.allocate(5000);
  EXPECT_EQ(s.metrics().stacklets, 2U);
  EXPECT_GE(s.top()->capacity(), 8192U);
  s.deallocate(p, 5000);
  EXPECT_TRUE(s.empty());
}

TEST(SegmentedStack, GrowthDoublesCapacity) {
  segmented_stack s;
  void* a = s.allocate(4096);
  void* b = s.allocate(16);
  EXPECT_EQ(s.top()->capacity(), 8192U);
  s.deallocate(b, 16);
  s.deallocate(a, 4096);
}

TEST(SegmentedStack, BoundaryChurnReusesCachedStacklet) {
  segmented_stack s;
  void* a = s.allocate(4096);
  auto const allocations = s.metrics().heap_allocations;
  for (int i = 0; i < 1000; ++i) {
    void* b = s.allocate(64);
    s.deallocate(b, 64);
  }
  EXPECT_EQ(s.metrics().heap_allocations, allocations + 1);
  EXPECT_NE(s.cached(), nullptr);
  s.deallocate(a, 4096);
}

TEST(SegmentedStack, OversizedEmptyStackletIsNotCached) {
  segmented_stack s;
  void* a = s.allocate(100000);
  s.deallocate(a, 100000);
  EXPECT_EQ(s.cached(), nullptr);
  EXPECT_EQ(s.metrics().footprint_bytes, 4096U + 48U);
}

TEST(SegmentedStack, CachedStackletTooSmallIsReplaced) {
  segmented_stack s;
  void* a = s.allocate(4096);
  void* b = s.allocate(16);
  s.deallocate(b, 16);
  ASSERT_NE(s.cached(), nullptr);
  void* c = s.allocate(20000);
  EXPECT_GE(s.top()->capacity(), 20000U);
  EXPECT_EQ(s.metrics().stacklets, 2U);
  s.deallocate(c, 20000);
  s.deallocate(a, 4096);
}

TEST(SegmentedStack, BoundValues) {
  EXPECT_EQ(segmented_stack_bound(1, 48), 2U * 48U + 4U);
  EXPECT_EQ(segmented_stack_bound(1000, 48), 11U * 48U + 4000U);
  EXPECT_EQ(segmented_stack_bound(1000, 0), 4000U);
  EXPECT_THROW((void)segmented_stack_bound(0, 48), std::invalid_argument);
}

TEST(SegmentedStack, RandomFiloSequencesStayWithinBound) {
  std::mt19937_64 rng(7);
  for (int seq = 0; seq < 500; ++seq) {
    segmented_stack s;
    std::vector<std::pair<void*, std::size_t>> live;
    std::size_t live_bytes = 0;
    std::size_t peak = 0;
    std::uniform_int_distribution<std::size_t> size(1, 1 << (seq % 14 + 1));
    for (int step = 0; step < 200; ++step) {
      if (live.empty() || rng() % 3 != 0) {
        std::size_t const n = size(rng);
        live.emplace_back(s.allocate(n), n);
        live_bytes += segmented_stack::round_up(n);
      } else {
        auto [p, n] = live.back();
        live.pop_back();
        s.deallocate(p, n);
        live_bytes -= segmented_stack::round_up(n);
      }
      peak = std::max(peak, live_bytes);
      ASSERT_EQ(s.metrics().live_bytes, live_bytes);
      if (peak > 0) {
        ASSERT_LE(s.metrics().footprint_bytes,
                  segmented_stack_bound(peak, 48) + segmented_stack::initial_capacity + 48);
      }
    }
    while (!live.empty()) {
      s.deallocate(live.back().first, live.back().second);
      live.pop_back();
    }
    EXPECT_TRUE(s.empty());
  }
}

TEST(SegmentedStack, FrameMemoryTracksAllStacks) {
  auto const before = forkline::frame_memory::current();
  {
    segmented_stack a;
    segmented_stack b;
    EXPECT_EQ(forkline::frame_memory::current(), before + 2 * (4096 + 48));
  }
  EXPECT_EQ(forkline::frame_memory::current(), before);
}

TEST(SegmentedStackDeath, OutOfOrderReleaseAborts) {
  EXPECT_DEATH(
      {
        segmented_stack s;
        void* a = s.allocate(16);
        (void)s.allocate(16);
        s.deallocate(a, 16);
      },
      "not FILO");
}
