#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "forkline/core/deque.hpp"

using forkline::deque;
using forkline::steal_tag;

TEST(Deque, PushThenPopIsLifo) {
  deque<int> d;
  d.push(1);
  d.push(2);
  d.push(3);
  EXPECT_EQ(d.pop(), 3);
  EXPECT_EQ(d.pop(), 2);
  EXPECT_EQ(d.pop(), 1);
  EXPECT_FALSE(d.pop().has_value());
}

TEST(Deque, StealTakesOldest) {
  deque<int> d;
  d.push(1);
  d.push(2);
  d.push(3);
  auto s = d.steal();
  ASSERT_EQ(s.tag, steal_tag::success);
  EXPECT_EQ(s.item, 1);
  EXPECT_EQ(d.pop(), 3);
  EXPECT_EQ(d.steal().item, 2);
  EXPECT_TRUE(d.empty());
}

TEST(Deque, EmptyOperations) {
  deque<int> d;
  EXPECT_FALSE(d.pop().has_value());
  EXPECT_EQ(d.steal().tag, steal_tag::empty);
  EXPECT_FALSE(static_cast<bool>(d.steal()));
  EXPECT_EQ(d.size(), 0U);
}

TEST(Deque, GrowsPastInitialCapacityAndKeepsOldBuffers) {
  deque<int> d;
  EXPECT_EQ(d.capacity(), 64);
  for (int i = 0; i < 65; ++i) {
    d.push(i);
  }
  EXPECT_EQ(d.capacity(), 128);
  EXPECT_EQ(d.retired_buffers(), 1U);
  EXPECT_EQ(d.size(), 65U);
  for (int i = 0; i < 65; ++i) {
    EXPECT_EQ(d.steal().item, i);
  }
}

TEST(Deque, SingleItemRaceHasOneWinner) {
  for (int round = 0; round < 2000; ++round) {
    deque<int> d;
    d.push(7);
    std::atomic<int> wins = 0;
    std::thread thief([&] {
      steal_tag tag;
      do {
        tag = d.steal().tag;
        if (tag == steal_tag::success) {
          wins.fetch_add(1);
        }
      } while (tag == steal_tag::abort);
    });
    if (d.pop()) {
      wins.fetch_add(1);
    }
    thief.join();
    EXPECT_EQ(wins.load(), 1);
  }
}

TEST(Deque, ConcurrentStealersConserveItems) {
  constexpr int items = 200000;
  constexpr int thieves = 3;
  deque<std::uint32_t> d;
  std::vector<std::vector<std::uint32_t>> taken(thieves + 1);
  std::atomic<bool> done = false;
  std::vector<std::thread> threads;
  for (int t = 0; t < thieves; ++t) {
    threads.emplace_back([&, t] {
      while (!done.load(std::memory_order_acquire) || !d.empty()) {
        if (auto s = d.steal()) {
          taken[static_cast<std::size_t>(t)].push_back(s.item);
        }
      }
    });
  }
  auto& mine = taken.back();
  for (std::uint32_t i = 0; i < items; ++i) {
    d.push(i);
    if (i % 3 == 0) {
      if (auto x = d.pop()) {
        mine.push_back(*x);
      }
    }
  }
  while (auto x = d.pop()) {
    mine.push_back(*x);
  }
  done.store(true, std::memory_order_release);
  for (auto& th : threads) {
    th.join();
  }
  std::vector<std::uint32_t> all;
  for (auto const& v : taken) {
    all.insert(all.end(), v.begin(), v.end());
  }
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), static_cast<std::size_t>(items));
  for (std::uint32_t i = 0; i < items; ++i) {
    ASSERT_EQ(all[i], i);
  }
}
