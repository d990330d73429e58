#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "forkline/bench/fib.hpp"
#include "forkline/bench/integrate.hpp"
#include "forkline/bench/matmul.hpp"
#include "forkline/bench/nqueens.hpp"
#include "forkline/bench/uts.hpp"
#include "forkline/metrics/metrics.hpp"
#include "forkline/sched/pool.hpp"
#include "forkline/sched/topology.hpp"

namespace forkline::bench {

struct bench_spec {
  std::string name = "fib";
  int n = 0; // size for fib, matmul and nqueens; 0 picks the default
  double lo = 0;
  double hi = 1e4;
  double eps = 1e-9;
  uts_params uts;
  std::vector<std::size_t> threads{1};
  scheduler_kind sched = scheduler_kind::busy;
  std::size_t reps = 5;
  std::uint64_t seed = 42;
  std::string topology = "flat";
  std::chrono::nanoseconds min_time = std::chrono::milliseconds(100);
};

inline auto default_size(std::string_view name) -> int {
  if (name == "fib") {
    return 34;
  }
  if (name == "matmul") {
    return 1024;
  }
  if (name == "nqueens") {
    return 12;
  }
  return 0;
}

inline void validate(bench_spec const& s) {
  int const n = s.n != 0 ? s.n : default_size(s.name);
  if (s.name == "fib") {
    if (n < 0 || n > 50) {
      throw std::invalid_argument("fib: n must be in [0, 50]");
    }
  } else if (s.name == "integrate") {
    validate_integrate(s.lo, s.hi, s.eps);
  } else if (s.name == "matmul") {
    if (n <= 0) {
      throw std::invalid_argument("matmul: n must be positive");
    }
    validate_matmul(static_cast<std::size_t>(n));
  } else if (s.name == "nqueens") {
    validate_nqueens(n);
  } else if (s.name == "uts") {
    validate_uts(s.uts);
  } else {
    throw std::invalid_argument("unknown benchmark '" + s.name + "' (expected fib, integrate, matmul, nqueens or uts)");
  }
  if (s.reps < 1) {
    throw std::invalid_argument("reps must be >= 1");
  }
  if (s.threads.empty() || std::find(s.threads.begin(), s.threads.end(), 0U) != s.threads.end()) {
    throw std::invalid_argument("threads must be a non-empty list of positive counts");
  }
}

/// 64-bit FNV-1a.
inline auto fnv1a(void const* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL) -> std::uint64_t {
  auto const* p = static_cast<unsigned char const*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
auto hash_value(T const& v) -> std::uint64_t {
  static_assert(std::is_trivially_copyable_v<T>);
  return fnv1a(&v, sizeof(T));
}

/// One benchmark instance: its serial oracle and its parallel form.
class workload {
 public:
  virtual ~workload() = default;

  [[nodiscard]] virtual auto params() const -> std::string = 0;

  /// Run the serial projection; the result becomes the oracle. Returns its hash.
  virtual auto run_serial() -> std::uint64_t = 0;

  /// Run on `p`. Returns the hash of the result.
  virtual auto run_parallel(pool& p) -> std::uint64_t = 0;

  /// Empty when the latest parallel result agrees with the oracle.
  [[nodiscard]] virtual auto mismatch() const -> std::string = 0;
};

namespace detail {

template <typename T, typename Serial, typename Parallel>
class value_workload final : public workload {
 public:
  value_workload(std::string params, Serial serial, Parallel parallel)
      : params_(std::move(params)), serial_(std::move(serial)), parallel_(std::move(parallel)) {}

  [[nodiscard]] auto params() const -> std::string override { return params_; }

  auto run_serial() -> std::uint64_t override {
    oracle_ = serial_();
    return hash_value(*oracle_);
  }

  auto run_parallel(pool& p) -> std::uint64_t override {
    got_ = parallel_(p);
    return hash_value(*got_);
  }

  [[nodiscard]] auto mismatch() const -> std::string override {
    if (!oracle_ || !got_) {
      return "missing result";
    }
    if (std::memcmp(&*oracle_, &*got_, sizeof(T)) != 0) {
      std::ostringstream os;
      os.precision(17);
      os << "parallel result " << *got_ << " differs from serial oracle " << *oracle_;
      return os.str();
    }
    return {};
  }

 private:
  std::string params_;
  Serial serial_;
  Parallel parallel_;
  std::optional<T> oracle_;
  std::optional<T> got_;
};

template <typename T, typename Serial, typename Parallel>
auto make_value_workload(std::string params, Serial s, Parallel p) -> std::unique_ptr<workload> {
  return std::make_unique<value_workload<T, Serial, Parallel>>(std::move(params), std::move(s), std::move(p));
}

class matmul_workload final : public workload {
 public:
  matmul_workload(std::size_t n, std::uint64_t seed)
      : n_(n), seed_(seed), a_(matrix::random(n, seed)), b_(matrix::random(n, seed + 1)), c_(n) {}

  [[nodiscard]] auto params() const -> std::string override {
    return "n=" + std::to_string(n_) + ";seed=" + std::to_string(seed_) + ";base=" + std::to_string(matmul_base);
  }

  auto run_serial() -> std::uint64_t override {
    oracle_ = matmul_serial(a_, b_);
    return fnv1a(oracle_.data.data(), oracle_.data.size() * sizeof(double));
  }

  auto run_parallel(pool& p) -> std::uint64_t override {
    p.run(multiply, block{c_.data.data(), n_}, block{a_.data.data(), n_}, block{b_.data.data(), n_}, n_);
    return fnv1a(c_.data.data(), c_.data.size() * sizeof(double));
  }

  [[nodiscard]] auto deviation() const -> double {
    double worst = 0;
    for (std::size_t i = 0; i < c_.data.size(); ++i) {
      worst = std::max(worst, std::abs(c_.data[i] - oracle_.data[i]));
    }
    return worst;
  }

  [[nodiscard]] auto mismatch() const -> std::string override {
    if (oracle_.n != n_) {
      return "missing oracle";
    }
    double const dev = deviation();
    if (!(dev <= 1e-8 * static_cast<double>(n_))) {
      return "max deviation " + std::to_string(dev) + " from the triple-loop product exceeds 1e-8*n";
    }
    return {};
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  matrix a_;
  matrix b_;
  matrix c_;
  matrix oracle_;
};

inline auto format_double(double v) -> std::string {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

} // namespace detail

inline auto make_workload(bench_spec const& s) -> std::unique_ptr<workload> {
  validate(s);
  int const n = s.n != 0 ? s.n : default_size(s.name);
  if (s.name == "fib") {
    return detail::make_value_workload<std::int64_t>(
        "n=" + std::to_string(n), [n] { return fib_serial(n); }, [n](pool& p) { return p.run(fib, n); });
  }
  if (s.name == "integrate") {
    double const lo = s.lo;
    double const hi = s.hi;
    double const eps = s.eps;
    return detail::make_value_workload<double>(
        "lo=" + detail::format_double(lo) + ";hi=" + detail::format_double(hi) + ";eps=" + detail::format_double(eps) +
            ";f=x^2",
        [=] { return integrate_serial(lo, hi, eps); }, [=](pool& p) { return p.run(integrate, lo, hi, eps); });
  }
  if (s.name == "matmul") {
    return std::make_unique<detail::matmul_workload>(static_cast<std::size_t>(n), s.seed);
  }
  if (s.name == "nqueens") {
    return detail::make_value_workload<std::int64_t>(
        "n=" + std::to_string(n), [n] { return nqueens_serial(n); }, [n](pool& p) { return p.run(nqueens, n); });
  }
  auto params = std::make_shared<uts_params const>(s.uts);
  return detail::make_value_workload<std::uint64_t>(
      describe(s.uts), [params] { return uts_serial(*params); }, [params](pool& p) { return p.run(uts, params.get()); });
}

/// One CSV row: a (benchmark, scheduler, worker count) cell.
struct bench_row {
  std::string benchmark;
  std::string params;
  std::string scheduler;
  std::size_t threads = 0;
  std::size_t reps = 0;
  double median_ns = 0;
  double stddev_ns = 0;
  std::size_t peak_frame_bytes = 0;
  std::uint64_t result_hash = 0;

  auto operator==(bench_row const&) const -> bool = default;
};

struct bench_result {
  std::vector<bench_row> rows;
  double serial_median_ns = 0;
  double serial_stddev_ns = 0;
  std::size_t m1 = 0;                    // single-worker peak frame bytes
  std::vector<mem_point> memory;         // one point per repetition
  std::optional<power_law_fit> fit;
  std::vector<std::string> warnings;
};

inline auto median(std::vector<double> v) -> double {
  if (v.empty()) {
    return 0;
  }
  std::sort(v.begin(), v.end());
  std::size_t const mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2;
}

/// Sample standard deviation; zero for fewer than two samples.
inline auto stddev(std::vector<double> const& v) -> double {
  if (v.size() < 2) {
    return 0;
  }
  double mean = 0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Call fn until at least `min_time` has elapsed; nanoseconds per call.
template <typename F>
auto time_per_call(std::chrono::nanoseconds min_time, F&& fn) -> double {
  using clock = std::chrono::steady_clock;
  auto const start = clock::now();
  std::size_t calls = 0;
  clock::duration elapsed{};
  do {
    fn();
    ++calls;
    elapsed = clock::now() - start;
  } while (elapsed < min_time);
  return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count()) /
         static_cast<double>(calls);
}

inline auto make_pool_options(bench_spec const& s, std::size_t threads) -> pool_options {
  pool_options o;
  o.threads = threads;
  o.kind = s.sched;
  o.seed = s.seed;
  o.topology = topology::parse(s.topology, threads);
  return o;
}

namespace detail {

struct cell {
  std::vector<double> times;
  std::vector<std::size_t> peaks;
  std::uint64_t hash = 0;
};

inline auto run_cell(bench_spec const& s, workload& w, std::size_t threads, std::size_t reps, bool timed) -> cell {
  cell c;
  std::size_t const base = frame_memory::current();
  pool p(make_pool_options(s, threads));
  for (std::size_t r = 0; r < reps; ++r) {
    frame_memory::reset_peak();
    std::uint64_t hash = 0;
    auto once = [&] {
      hash = w.run_parallel(p);
      if (auto why = w.mismatch(); !why.empty()) {
        throw std::runtime_error(s.name + " at " + std::to_string(threads) + " workers: " + why);
      }
    };
    c.times.push_back(timed ? time_per_call(s.min_time, once) : (once(), 0.0));
    c.peaks.push_back(peak_frame_memory() - std::min(base, peak_frame_memory()));
    if (r > 0 && hash != c.hash) {
      throw std::runtime_error(s.name + ": result changed between repetitions");
    }
    c.hash = hash;
  }
  return c;
}

} // namespace detail

/// Time the serial projection and every requested worker count, checking each
/// parallel result against the serial oracle. Throws on any mismatch.
inline auto run_bench(bench_spec const& s) -> bench_result {
  auto w = make_workload(s);
  bench_result out;

  std::vector<double> serial;
  std::uint64_t serial_hash = 0;
  for (std::size_t r = 0; r < s.reps; ++r) {
    serial.push_back(time_per_call(s.min_time, [&] { serial_hash = w->run_serial(); }));
  }
  out.serial_median_ns = median(serial);
  out.serial_stddev_ns = stddev(serial);

  std::map<std::size_t, detail::cell> cells;
  for (std::size_t p : s.threads) {
    if (!cells.contains(p)) {
      cells.emplace(p, detail::run_cell(s, *w, p, s.reps, true));
    }
  }
  if (!cells.contains(1)) {
    out.m1 = detail::run_cell(s, *w, 1, 1, false).peaks.front();
  } else {
    auto const& peaks = cells.at(1).peaks;
    out.m1 = *std::max_element(peaks.begin(), peaks.end());
  }

  std::string const params = w->params();
  for (std::size_t p : s.threads) {
    auto const& c = cells.at(p);
    bench_row row;
    row.benchmark = s.name;
    row.params = params;
    row.scheduler = std::string(to_string(s.sched));
    row.threads = p;
    row.reps = s.reps;
    row.median_ns = median(c.times);
    row.stddev_ns = stddev(c.times);
    row.peak_frame_bytes = *std::max_element(c.peaks.begin(), c.peaks.end());
    row.result_hash = c.hash;
    out.rows.push_back(row);
    if (s.name != "matmul" && c.hash != serial_hash) {
      throw std::runtime_error(s.name + ": result hash differs from the serial oracle");
    }
  }

  std::set<std::size_t> distinct;
  for (auto const& [p, c] : cells) {
    distinct.insert(p);
    for (std::size_t peak : c.peaks) {
      out.memory.push_back({static_cast<double>(p), static_cast<double>(out.m1), static_cast<double>(peak)});
    }
  }
  if (distinct.size() >= 3 && out.memory.size() >= 4 && out.m1 > 0) {
    out.fit = fit_power_law(out.memory);
  }

  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    auto const& prev = out.rows[i - 1];
    auto const& cur = out.rows[i];
    if (cur.threads > prev.threads && cur.median_ns > prev.median_ns) {
      out.warnings.push_back("speedup dropped from " + std::to_string(prev.threads) + " to " +
                             std::to_string(cur.threads) + " workers");
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
// CSV
// ----------------------------------------------------------------------------

inline constexpr std::string_view csv_header =
    "benchmark,params,scheduler,threads,reps,median_ns,stddev_ns,peak_frame_bytes,result_hash";

inline auto hex64(std::uint64_t v) -> std::string {
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, 16);
  return std::string(buf, ptr);
}

inline void write_csv(std::ostream& os, bench_result const& r) {
  using detail::format_double;
  os << csv_header << '\n';
  for (auto const& row : r.rows) {
    os << row.benchmark << ',' << row.params << ',' << row.scheduler << ',' << row.threads << ',' << row.reps << ','
       << format_double(row.median_ns) << ',' << format_double(row.stddev_ns) << ',' << row.peak_frame_bytes << ','
       << hex64(row.result_hash) << '\n';
  }
  os << "# serial median_ns=" << format_double(r.serial_median_ns) << " stddev_ns=" << format_double(r.serial_stddev_ns)
     << '\n';
  for (auto const& row : r.rows) {
    timing_record t{r.serial_median_ns, 0, row.median_ns, row.threads};
    if (t.serial > 0 && t.parallel > 0) {
      os << "# speedup threads=" << row.threads << " speedup=" << format_double(speedup(t))
         << " efficiency=" << format_double(efficiency(t)) << '\n';
    }
    if (r.m1 > 0) {
      std::size_t const bound = parallel_stack_bound(row.threads, r.m1, segmented_stack::metadata_bytes);
      os << "# bound threads=" << row.threads << " peak=" << row.peak_frame_bytes << " m1=" << r.m1
         << " limit=" << bound << " ok=" << (row.peak_frame_bytes <= bound ? 1 : 0) << '\n';
    }
  }
  if (r.fit) {
    os << "# fit a=" << format_double(r.fit->a) << " b=" << format_double(r.fit->b) << " n=" << format_double(r.fit->n)
       << " stderr=" << format_double(r.fit->n_stderr) << '\n';
  }
}

struct parsed_csv {
  std::vector<bench_row> rows;
  std::optional<double> serial_median_ns;
  std::optional<power_law_fit> fit;
};

namespace detail {

inline auto split(std::string_view s, char sep) -> std::vector<std::string_view> {
  std::vector<std::string_view> out;
  while (true) {
    auto i = s.find(sep);
    out.push_back(s.substr(0, i));
    if (i == std::string_view::npos) {
      return out;
    }
    s.remove_prefix(i + 1);
  }
}

template <typename T>
auto parse_number(std::string_view s, int base = 10) -> T {
  T v{};
  std::from_chars_result res{};
  if constexpr (std::is_floating_point_v<T>) {
    (void)base;
    if (s == "inf") {
      return std::numeric_limits<T>::infinity();
    }
    res = std::from_chars(s.data(), s.data() + s.size(), v);
  } else {
    res = std::from_chars(s.data(), s.data() + s.size(), v, base);
  }
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: bad number '" + std::string(s) + "'");
  }
  return v;
}

/// Value of `key=` among space-separated fields.
inline auto field(std::string_view line, std::string_view key) -> std::optional<std::string_view> {
  for (auto tok : split(line, ' ')) {
    if (tok.size() > key.size() && tok.starts_with(key) && tok[key.size()] == '=') {
      return tok.substr(key.size() + 1);
    }
  }
  return std::nullopt;
}

} // namespace detail

inline auto parse_csv(std::istream& in) -> parsed_csv {
  parsed_csv out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    std::string_view v = line;
    if (v.empty()) {
      continue;
    }
    if (v.front() == '#') {
      if (v.starts_with("# fit ")) {
        power_law_fit f;
        f.a = detail::parse_number<double>(detail::field(v, "a").value());
        f.b = detail::parse_number<double>(detail::field(v, "b").value());
        f.n = detail::parse_number<double>(detail::field(v, "n").value());
        f.n_stderr = detail::parse_number<double>(detail::field(v, "stderr").value());
        out.fit = f;
      } else if (v.starts_with("# serial ")) {
        out.serial_median_ns = detail::parse_number<double>(detail::field(v, "median_ns").value());
      }
      continue;
    }
    if (!header) {
      if (v != csv_header) {
        throw std::invalid_argument("csv: unexpected header '" + line + "'");
      }
      header = true;
      continue;
    }
    auto cols = detail::split(v, ',');
    if (cols.size() != 9) {
      throw std::invalid_argument("csv: expected 9 columns in '" + line + "'");
    }
    bench_row row;
    row.benchmark = cols[0];
    row.params = cols[1];
    row.scheduler = cols[2];
    row.threads = detail::parse_number<std::size_t>(cols[3]);
    row.reps = detail::parse_number<std::size_t>(cols[4]);
    row.median_ns = detail::parse_number<double>(cols[5]);
    row.stddev_ns = detail::parse_number<double>(cols[6]);
    row.peak_frame_bytes = detail::parse_number<std::size_t>(cols[7]);
    row.result_hash = detail::parse_number<std::uint64_t>(cols[8], 16);
    out.rows.push_back(std::move(row));
  }
  return out;
}

} // namespace forkline::bench
