#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forkline/bench/runner.hpp"

namespace fb = forkline::bench;

int main(int argc, char** argv) {
  CLI::App app{"forkline benchmark harness: times the serial projection and a sweep of worker counts, checks "
               "every parallel result against the serial oracle, and writes CSV"};

  fb::bench_spec spec;
  std::string sched = "busy";
  std::string shape = "geometric";
  std::string format = "csv";
  std::string out_path;
  double min_time_ms = 100;
  bool heap_counts = false;
  std::optional<std::uint64_t> uts_seed;

  app.add_option("--name", spec.name, "fib | integrate | matmul | nqueens | uts")
      ->check(CLI::IsMember({"fib", "integrate", "matmul", "nqueens", "uts"}));
  app.add_option("--n", spec.n, "problem size (fib 34, matmul 1024, nqueens 12 by default)");
  app.add_option("--threads", spec.threads, "worker counts to sweep, e.g. 1,2,4,8")->delimiter(',');
  app.add_option("--sched", sched, "busy | lazy")->check(CLI::IsMember({"busy", "lazy"}));
  app.add_option("--reps", spec.reps, "repetitions per worker count")->check(CLI::PositiveNumber);
  app.add_option("--seed", spec.seed, "scheduler and input seed");
  app.add_option("--topology", spec.topology, "flat | system | two-level:<nodes>x<cores>");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv"}));
  app.add_option("--out", out_path, "write CSV here instead of stdout");
  app.add_option("--min-time-ms", min_time_ms, "each repetition loops until this much time has passed");

  app.add_option("--lo", spec.lo, "integrate: lower limit");
  app.add_option("--hi", spec.hi, "integrate: upper limit");
  app.add_option("--eps", spec.eps, "integrate: tolerance");

  app.add_option("--shape", shape, "uts: geometric | binomial")->check(CLI::IsMember({"geometric", "binomial"}));
  app.add_option("--depth", spec.uts.d, "uts geometric: depth cutoff d");
  app.add_option("--branch", spec.uts.b, "uts geometric: expected branching b");
  app.add_option("--prob", spec.uts.q, "uts binomial: child probability q");
  app.add_option("--children", spec.uts.m, "uts binomial: children on success m");
  app.add_option("--root-children", spec.uts.root_children, "uts binomial: root branching");
  app.add_option("--tree-seed", uts_seed, "uts: root seed r (19 for geometric, 42 for binomial by default)");
  app.add_flag("--heap-counts", heap_counts, "uts: keep child counts on the heap instead of the task stack");

  CLI11_PARSE(app, argc, argv);

  spec.sched = forkline::parse_scheduler(sched);
  spec.min_time = std::chrono::nanoseconds(static_cast<std::int64_t>(min_time_ms * 1e6));
  spec.uts.shape = shape == "binomial" ? fb::uts_shape::binomial : fb::uts_shape::geometric;
  spec.uts.r = uts_seed.value_or(spec.uts.shape == fb::uts_shape::binomial ? 42 : 19);
  spec.uts.stack_alloc = !heap_counts;

  try {
    fb::validate(spec);
    auto result = fb::run_bench(spec);
    for (auto const& w : result.warnings) {
      std::cerr << "warning: " << w << '\n';
    }
    if (out_path.empty()) {
      fb::write_csv(std::cout, result);
    } else {
      std::ofstream out(out_path);
      if (!out) {
        std::cerr << "error: cannot open " << out_path << '\n';
        return 1;
      }
      fb::write_csv(out, result);
    }
  } catch (std::invalid_argument const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
