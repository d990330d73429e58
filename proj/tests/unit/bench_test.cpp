#include <sstream>

#include <gtest/gtest.h>

#include "forkline/bench/runner.hpp"

using namespace forkline;
using namespace forkline::bench;

namespace {

auto make_pool(std::size_t n, scheduler_kind k = scheduler_kind::busy) -> pool_options {
  pool_options o;
  o.threads = n;
  o.kind = k;
  return o;
}

} // namespace

TEST(Bench, FibSerial) {
  EXPECT_EQ(fib_serial(0), 0);
  EXPECT_EQ(fib_serial(1), 1);
  EXPECT_EQ(fib_serial(10), 55);
  EXPECT_EQ(fib_serial(42), 267914296);
}

TEST(Bench, IntegrateMatchesClosedForm) {
  EXPECT_NEAR(integrate_serial(0, 1, 1e-9), 1.0 / 3, 1e-6);
  pool p(make_pool(2));
  double const par = p.run(integrate, 0.0, 1.0, 1e-9);
  EXPECT_EQ(par, integrate_serial(0, 1, 1e-9));
}

TEST(Bench, IntegrateTinyIntervalIsBaseCase) {
  double const d = 1e-12;
  EXPECT_EQ(integrate_serial(0, d, 1e-9), trapezoid(0, d / 2) + trapezoid(d / 2, d));
  EXPECT_THROW(validate_integrate(1, 1, 1e-9), std::invalid_argument);
  EXPECT_THROW(validate_integrate(0, 1, 0), std::invalid_argument);
}

TEST(Bench, MatmulBaseCaseIsExact) {
  auto a = matrix::random(32, 1);
  auto b = matrix::random(32, 2);
  matrix c(32);
  pool p(make_pool(2));
  p.run(multiply, block{c.data.data(), 32}, block{a.data.data(), 32}, block{b.data.data(), 32}, std::size_t{32});
  EXPECT_EQ(c.data, matmul_serial(a, b).data);
}

TEST(Bench, MatmulIdentity) {
  auto a = matrix::random(128, 3);
  auto id = matrix::identity(128);
  matrix c(128);
  pool p(make_pool(3));
  p.run(multiply, block{c.data.data(), 128}, block{id.data.data(), 128}, block{a.data.data(), 128}, std::size_t{128});
  EXPECT_EQ(c.data, a.data);
  EXPECT_THROW(validate_matmul(48), std::invalid_argument);
}

TEST(Bench, NqueensCounts) {
  EXPECT_EQ(nqueens_serial(1), 1);
  EXPECT_EQ(nqueens_serial(8), 92);
  EXPECT_EQ(nqueens_serial(10), 724);
  for (auto k : {scheduler_kind::busy, scheduler_kind::lazy}) {
    pool p(make_pool(3, k));
    EXPECT_EQ(p.run(nqueens, 8), 92);
  }
  EXPECT_THROW(validate_nqueens(0), std::invalid_argument);
  EXPECT_THROW(validate_nqueens(17), std::invalid_argument);
}

TEST(Bench, UtsShapes) {
  uts_params g;
  g.d = 1;
  EXPECT_EQ(uts_serial(g), 1 + uts_children(g, uts_root(g.r), 0));

  uts_params b;
  b.shape = uts_shape::binomial;
  b.q = 0;
  EXPECT_EQ(uts_serial(b), 2001U);

  b.q = 0.25;
  b.m = 4;
  EXPECT_THROW(validate_uts(b), std::invalid_argument);
}

TEST(Bench, UtsParallelMatchesSerial) {
  uts_params g;
  g.d = 6;
  pool p(make_pool(3));
  for (bool stack : {true, false}) {
    g.stack_alloc = stack;
    EXPECT_EQ(p.run(uts, &g), uts_serial(g));
  }
}

TEST(Bench, Mix64IsABijectionOnSamples) {
  EXPECT_NE(mix64(0), mix64(1));
  EXPECT_EQ(mix64(42), mix64(42));
  EXPECT_LT(uts_uniform(~0ULL), 1.0);
}

TEST(Bench, RunBenchProducesOneRowPerWorkerCount) {
  bench_spec s;
  s.name = "fib";
  s.n = 18;
  s.threads = {1, 2, 3};
  s.reps = 2;
  s.min_time = std::chrono::nanoseconds(0);
  auto r = run_bench(s);
  ASSERT_EQ(r.rows.size(), 3U);
  for (auto const& row : r.rows) {
    EXPECT_GT(row.median_ns, 0);
    EXPECT_EQ(row.result_hash, hash_value(fib_serial(18)));
    EXPECT_GT(row.peak_frame_bytes, 0U);
  }
  EXPECT_TRUE(r.fit.has_value());
}

TEST(Bench, SingleRepetitionHasZeroSpread) {
  bench_spec s;
  s.name = "nqueens";
  s.n = 6;
  s.reps = 1;
  s.min_time = std::chrono::nanoseconds(0);
  auto r = run_bench(s);
  EXPECT_EQ(r.rows.at(0).stddev_ns, 0.0);
}

TEST(Bench, CsvRoundTrip) {
  bench_result r;
  r.rows.push_back({"uts", "shape=geometric;d=4", "lazy", 2, 5, 1234.5, 0.1, 8192, 0xdeadbeefULL});
  r.rows.push_back({"uts", "shape=geometric;d=4", "lazy", 4, 5, 1e-3, 1.0 / 3, 0, ~0ULL});
  r.serial_median_ns = 99.25;
  r.m1 = 100;
  r.fit = power_law_fit{1.5, 0.25, 0.875, 0, 0.03125};
  std::stringstream ss;
  write_csv(ss, r);
  auto back = parse_csv(ss);
  EXPECT_EQ(back.rows, r.rows);
  ASSERT_TRUE(back.fit.has_value());
  EXPECT_EQ(back.fit->a, 1.5);
  EXPECT_EQ(back.fit->n, 0.875);
  EXPECT_EQ(back.fit->n_stderr, 0.03125);
  EXPECT_EQ(back.serial_median_ns, 99.25);
}

TEST(Bench, CsvRejectsWrongShape) {
  std::stringstream bad_header("a,b,c\n");
  EXPECT_THROW((void)parse_csv(bad_header), std::invalid_argument);
  std::stringstream short_row(std::string(csv_header) + "\nfib,n=1,busy\n");
  EXPECT_THROW((void)parse_csv(short_row), std::invalid_argument);
}

TEST(Bench, SpecValidation) {
  bench_spec s;
  s.name = "sort";
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.name = "fib";
  s.n = 51;
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.n = 10;
  s.threads = {};
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.threads = {1};
  s.reps = 0;
  EXPECT_THROW(validate(s), std::invalid_argument);
}
