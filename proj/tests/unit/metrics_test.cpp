#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "forkline/metrics/metrics.hpp"

using namespace forkline;

TEST(Metrics, SpeedupAndEfficiency) {
  EXPECT_DOUBLE_EQ(speedup({10, 0, 2, 5}), 5.0);
  EXPECT_DOUBLE_EQ(speedup({3, 0, 3, 1}), 1.0);
  EXPECT_DOUBLE_EQ(efficiency({10, 0, 2, 5}), 1.0);
  EXPECT_DOUBLE_EQ(efficiency({10, 0, 2, 10}), 0.5);
  EXPECT_THROW((void)speedup({0, 0, 1, 1}), std::invalid_argument);
  EXPECT_THROW((void)speedup({1, 0, -1, 1}), std::invalid_argument);
  EXPECT_THROW((void)efficiency({1, 0, 1, 0}), std::invalid_argument);
}

TEST(Metrics, ParallelStackBound) {
  EXPECT_EQ(parallel_stack_bound(4, 1000000, 48), 396000000U);
  EXPECT_EQ(parallel_stack_bound(1, 1234, 0), 3U * 1234U);
  EXPECT_TRUE(within_parallel_bound({4, 1000, 3999, 48}));
  EXPECT_FALSE(within_parallel_bound({1, 1000, 1000 * 99 + 1, 48}));
}

namespace {

auto synthetic(double a, double b, double n, std::vector<double> const& ps, double m1) -> std::vector<mem_point> {
  std::vector<mem_point> pts;
  for (double p : ps) {
    pts.push_back({p, m1, a + b * m1 * std::pow(p, n)});
  }
  return pts;
}

} // namespace

TEST(Metrics, FitRecoversExponentOnCleanData) {
  for (double n : {0.5, 1.0, 1.5}) {
    auto f = fit_power_law(synthetic(1e6, 0.2, n, {1, 2, 4, 8}, 1e6));
    EXPECT_NEAR(f.n, n, 0.05) << "n=" << n;
    EXPECT_NEAR(f.b, 0.2, 0.02);
    EXPECT_GE(f.sse, 0.0);
  }
}

TEST(Metrics, ConstantDataFitsFlat) {
  std::vector<mem_point> pts{{1, 5e5, 2e6}, {2, 5e5, 2e6}, {4, 5e5, 2e6}, {8, 5e5, 2e6}};
  auto f = fit_power_law(pts);
  EXPECT_NEAR(f.n, 0.0, 0.05);
  EXPECT_NEAR(f.a + f.b * 5e5, 2e6, 1.0);
}

TEST(Metrics, FitRejectsDegenerateInput) {
  std::vector<mem_point> three{{1, 1, 1}, {2, 1, 2}, {4, 1, 4}};
  EXPECT_THROW((void)fit_power_law(three), std::invalid_argument);
  std::vector<mem_point> two_p{{1, 1, 1}, {2, 1, 2}, {1, 1, 1}, {2, 1, 2}};
  EXPECT_THROW((void)fit_power_law(two_p), std::invalid_argument);
  std::vector<mem_point> bad{{0, 1, 1}, {2, 1, 2}, {3, 1, 1}, {4, 1, 2}};
  EXPECT_THROW((void)fit_power_law(bad), std::invalid_argument);
}

TEST(Metrics, FitIsDeterministic) {
  auto pts = synthetic(100, 3, 0.7, {1, 2, 3, 4, 6}, 1000);
  auto a = fit_power_law(pts);
  auto b = fit_power_law(pts);
  EXPECT_EQ(a.n, b.n);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.n_stderr, b.n_stderr);
}
