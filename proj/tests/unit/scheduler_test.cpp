#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "forkline/bench/fib.hpp"
#include "forkline/forkline.hpp"

using namespace forkline;

TEST(Topology, FlatDistancesAreOne) {
  auto t = topology::flat(4);
  EXPECT_EQ(t.size(), 4U);
  EXPECT_EQ(t.group_count(), 1U);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(t.distance(i, j), i == j ? 0 : 1);
    }
  }
}

TEST(Topology, TwoLevelDistancesAndGroups) {
  auto t = topology::two_level(2, 2);
  EXPECT_EQ(t.distance(0, 1), 1);
  EXPECT_EQ(t.distance(0, 2), 2);
  EXPECT_EQ(t.distance(3, 0), 2);
  EXPECT_EQ(t.group_count(), 2U);
  EXPECT_EQ(t.group(0), t.group(1));
  EXPECT_NE(t.group(1), t.group(2));
}

TEST(Topology, UnevenDepthUsesLongerLeg) {
  // root(0) -> a(1) -> core(2); root(0) -> core(3)
  topology t({-1, 0, 1, 0}, {2, 3}, {true, false, false, false});
  EXPECT_EQ(t.distance(0, 1), 2);
  EXPECT_EQ(t.distance(1, 0), 2);
}

TEST(Topology, ParseShapes) {
  EXPECT_EQ(topology::parse("flat", 3).size(), 3U);
  EXPECT_EQ(topology::parse("two-level:2x4", 8).group_count(), 2U);
  EXPECT_EQ(topology::parse("system", 2).size(), 2U);
  EXPECT_THROW((void)topology::parse("two-level:2x4", 4), std::invalid_argument);
  EXPECT_THROW((void)topology::parse("two-level:2by4", 8), std::invalid_argument);
  EXPECT_THROW((void)topology::parse("ring", 4), std::invalid_argument);
  EXPECT_THROW((void)topology::flat(0), std::invalid_argument);
}

TEST(Topology, RejectsMalformedTrees) {
  EXPECT_THROW(topology({-1, -1}, {0, 1}, {false, false}), std::invalid_argument);
  EXPECT_THROW(topology({-1, 0}, {1, 1}, {false, false}), std::invalid_argument);
  EXPECT_THROW(topology({-1, 0}, {1}, {false}), std::invalid_argument);
}

TEST(Topology, CpulistParsing) {
  EXPECT_EQ(detail::parse_cpulist("0-3,8,10-11\n"), (std::vector<int>{0, 1, 2, 3, 8, 10, 11}));
  EXPECT_TRUE(detail::parse_cpulist("").empty());
}

TEST(Victims, HandComputedTwoLevelTable) {
  auto t = topology::two_level(2, 2);
  auto v = victim_table::build(t, 0);
  EXPECT_NEAR(v.probability(1), 0.8, 1e-12);
  EXPECT_NEAR(v.probability(2), 0.1, 1e-12);
  EXPECT_NEAR(v.probability(3), 0.1, 1e-12);
  EXPECT_EQ(v.probability(0), 0.0);
}

TEST(Victims, FlatIsUniform) {
  auto v = victim_table::build(topology::flat(4), 2);
  for (std::size_t j : {0, 1, 3}) {
    EXPECT_NEAR(v.probability(j), 1.0 / 3, 1e-12);
  }
}

TEST(Victims, SingleWorkerHasNoVictims) {
  EXPECT_TRUE(victim_table::build(topology::flat(1), 0).empty());
}

TEST(Victims, SamplingMatchesTable) {
  auto v = victim_table::build(topology::two_level(2, 2), 0);
  std::mt19937_64 rng(1);
  std::map<std::size_t, int> hits;
  constexpr int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    ++hits[v.select(rng)];
  }
  EXPECT_EQ(hits.count(0), 0U);
  EXPECT_NEAR(hits[1] / double(draws), 0.8, 0.01);
  EXPECT_NEAR(hits[2] / double(draws), 0.1, 0.01);
}

TEST(Pool, RejectsMismatchedTopology) {
  pool_options o;
  o.threads = 3;
  o.topology = topology::flat(2);
  EXPECT_THROW(pool p(o), std::invalid_argument);
}

TEST(Pool, EnvironmentOverrides) {
  ::setenv("FORKLINE_THREADS", "3", 1);
  ::setenv("FORKLINE_SCHED", "lazy", 1);
  auto o = pool_options::from_env();
  EXPECT_EQ(o.threads, 3U);
  EXPECT_EQ(o.kind, scheduler_kind::lazy);
  ::setenv("FORKLINE_SCHED", "eager", 1);
  EXPECT_THROW((void)pool_options::from_env(), std::invalid_argument);
  ::unsetenv("FORKLINE_THREADS");
  ::unsetenv("FORKLINE_SCHED");
}

TEST(Pool, ParseScheduler) {
  EXPECT_EQ(parse_scheduler("busy"), scheduler_kind::busy);
  EXPECT_EQ(parse_scheduler("lazy"), scheduler_kind::lazy);
  EXPECT_THROW((void)parse_scheduler("Lazy"), std::invalid_argument);
}

namespace {

auto process_cpu_seconds() -> double {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

auto wait_for_sleepers(pool& p, int count) -> bool {
  auto const deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (p.sleeping_workers() < count) {
    if (std::chrono::steady_clock::now() > deadline) {
      return false;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return true;
}

} // namespace

TEST(LazyPool, IdleWorkersFallAsleep) {
  pool_options o;
  o.threads = 4;
  o.kind = scheduler_kind::lazy;
  pool p(o);
  EXPECT_TRUE(wait_for_sleepers(p, 4));
  double const before = process_cpu_seconds();
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  EXPECT_LT(process_cpu_seconds() - before, 0.01);
  EXPECT_EQ(p.run(bench::fib, 20), 6765);
  EXPECT_TRUE(wait_for_sleepers(p, 4));
}

TEST(LazyPool, SubmitToSleepingPoolWakesIt) {
  pool_options o;
  o.threads = 2;
  o.kind = scheduler_kind::lazy;
  pool p(o);
  for (int i = 0; i < 200; ++i) {
    EXPECT_EQ(p.run(bench::fib, 5), 5);
  }
  auto s = stats().snapshot();
  EXPECT_EQ(s.greedy_violations, 0U);
}

TEST(LazyPool, TwoGroupsStayLive) {
  pool_options o;
  o.threads = 4;
  o.kind = scheduler_kind::lazy;
  o.topology = topology::two_level(2, 2);
  pool p(o);
  EXPECT_EQ(p.run(bench::fib, 24), bench::fib_serial(24));
}
