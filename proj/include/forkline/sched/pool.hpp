#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#if defined(__linux__)
#  include <pthread.h>
#  include <sched.h>
#endif

#include "forkline/core/context.hpp"
#include "forkline/core/stats.hpp"
#include "forkline/core/task.hpp"
#include "forkline/sched/topology.hpp"
#include "forkline/sched/victim.hpp"

namespace forkline {

enum class scheduler_kind { busy, lazy };

inline auto to_string(scheduler_kind k) -> std::string_view { return k == scheduler_kind::busy ? "busy" : "lazy"; }

inline auto parse_scheduler(std::string_view s) -> scheduler_kind {
  if (s == "busy") {
    return scheduler_kind::busy;
  }
  if (s == "lazy") {
    return scheduler_kind::lazy;
  }
  throw std::invalid_argument("unknown scheduler '" + std::string(s) + "' (expected busy or lazy)");
}

struct pool_options {
  std::size_t threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  scheduler_kind kind = scheduler_kind::busy;
  std::optional<forkline::topology> topology; // defaults to flat(threads)
  std::uint64_t seed = 42;

  /// Apply FORKLINE_THREADS, FORKLINE_SCHED and FORKLINE_SEED overrides.
  static auto from_env(pool_options base) -> pool_options {
    if (char const* t = std::getenv("FORKLINE_THREADS"); t != nullptr && *t != '\0') {
      auto n = std::stoull(t);
      if (n == 0) {
        throw std::invalid_argument("FORKLINE_THREADS must be >= 1");
      }
      base.threads = n;
      if (base.topology && base.topology->size() != n) {
        base.topology.reset();
      }
    }
    if (char const* s = std::getenv("FORKLINE_SCHED"); s != nullptr && *s != '\0') {
      base.kind = parse_scheduler(s);
    }
    if (char const* s = std::getenv("FORKLINE_SEED"); s != nullptr && *s != '\0') {
      base.seed = std::stoull(s);
    }
    return base;
  }

  static auto from_env() -> pool_options;
};

inline auto pool_options::from_env() -> pool_options { return from_env(pool_options{}); }

namespace detail {

template <typename T>
struct root_state : root_state_base {
  T value{};
};

template <>
struct root_state<void> : root_state_base {};

} // namespace detail

/// Handle on a scheduled root task.
template <typename T>
class [[nodiscard]] ticket {
 public:
  explicit ticket(detail::root_state<T>* state) noexcept : state_(state) {}
  ticket(ticket&& other) noexcept : state_(std::exchange(other.state_, nullptr)) {}
  ticket(ticket const&) = delete;
  auto operator=(ticket const&) -> ticket& = delete;
  auto operator=(ticket&& other) noexcept -> ticket& {
    std::swap(state_, other.state_);
    return *this;
  }
  ~ticket() {
    if (state_ != nullptr) {
      state_->drop();
    }
  }

  [[nodiscard]] auto ready() const noexcept -> bool { return state_->ready(); }

  void wait() const noexcept { state_->wait(); }

  /// Block until the root task returns, then yield its result.
  auto get() -> T {
    state_->wait();
    if constexpr (!std::is_void_v<T>) {
      return std::move(state_->value);
    }
  }

 private:
  detail::root_state<T>* state_;
};

template <typename T>
auto sync_wait(ticket<T>&& t) -> T {
  return t.get();
}

/// A fixed set of worker threads executing forkline tasks.
///
/// Each worker owns a work-stealing deque, a submission queue and (at any one
/// time) one segmented stack. Idle workers steal from victims drawn from the
/// topology-weighted table. Busy pools spin while idle; lazy pools let idle
/// workers sleep, keeping one thief awake per NUMA group while any worker is
/// active.
class pool final : private detail::executor {
 public:
  explicit pool(pool_options opts = pool_options::from_env())
      : kind_(opts.kind), topo_(opts.topology ? std::move(*opts.topology) : topology::flat(opts.threads)) {
    if (opts.threads == 0) {
      throw std::invalid_argument("pool: need at least one worker");
    }
    if (topo_.size() != opts.threads) {
      throw std::invalid_argument("pool: topology has " + std::to_string(topo_.size()) + " cores for " +
                                  std::to_string(opts.threads) + " workers");
    }
    groups_ = std::vector<group_state>(topo_.group_count());
    std::seed_seq seq{opts.seed};
    std::vector<std::uint64_t> seeds(opts.threads);
    seq.generate(seeds.begin(), seeds.end());
    for (std::size_t i = 0; i < opts.threads; ++i) {
      auto w = std::make_unique<worker>(i, seeds[i]);
      w->victims = victim_table::build(topo_, i);
      w->group = topo_.group(i);
      w->exec = this;
      w->notify_forks = kind_ == scheduler_kind::lazy;
      w->home = new segmented_stack();
      w->home->claim(static_cast<int>(i));
      groups_[w->group].members.push_back(i);
      groups_[w->group].awake_thieves.fetch_add(1, std::memory_order_relaxed);
      workers_.push_back(std::move(w));
    }
    for (auto& w : workers_) {
      w->thread = std::thread([this, raw = w.get()] { worker_main(*raw); });
    }
  }

  pool(pool const&) = delete;
  auto operator=(pool const&) -> pool& = delete;

  ~pool() {
    shutdown();
    for (auto& w : workers_) {
      delete w->home;
    }
  }

  /// Stop and join every worker. Roots still queued are abandoned; wait on
  /// every ticket first.
  void shutdown() noexcept {
    if (stopped_.exchange(true, std::memory_order_seq_cst)) {
      return;
    }
    for (auto& w : workers_) {
      wake(*w);
    }
    for (auto& w : workers_) {
      if (w->thread.joinable()) {
        w->thread.join();
      }
    }
  }

  [[nodiscard]] auto size() const noexcept -> std::size_t { return workers_.size(); }
  [[nodiscard]] auto kind() const noexcept -> scheduler_kind { return kind_; }
  [[nodiscard]] auto layout() const noexcept -> forkline::topology const& { return topo_; }
  [[nodiscard]] auto victims(std::size_t worker) const -> victim_table const& { return workers_.at(worker)->victims; }

  /// Number of workers currently executing a task (maintained by lazy pools only).
  [[nodiscard]] auto active_workers() const noexcept -> int { return active_.load(std::memory_order_relaxed); }

  /// Number of workers currently asleep (lazy pools only).
  [[nodiscard]] auto sleeping_workers() const noexcept -> int {
    int n = 0;
    for (auto const& g : groups_) {
      n += g.sleepers.load(std::memory_order_relaxed);
    }
    return n;
  }

  /// Enqueue fn(args...) as a root task. The frame is built on a fresh stack
  /// that the receiving worker adopts. Roots are placed round-robin.
  template <typename F, typename... Args>
  auto schedule(F fn, Args&&... args) -> ticket<detail::task_result_t<F&, Args...>> {
    using R = detail::task_result_t<F&, Args...>;
    if (stopped_.load(std::memory_order_acquire)) {
      throw std::logic_error("pool: schedule after shutdown");
    }
    auto stack = std::make_unique<segmented_stack>();
    segmented_stack* saved = std::exchange(tls::stack, stack.get());
    auto* frame = std::invoke(fn, std::forward<Args>(args)...).release();
    tls::stack = saved;
    stack.release(); // now reachable through the frame's stacklet

    auto* state = new detail::root_state<R>();
    frame->kind = frame_kind::root;
    frame->parent = nullptr;
    frame->root = state;
    if constexpr (!std::is_void_v<R>) {
      frame->result = &state->value;
    }
    submit_to(next_root_.fetch_add(1, std::memory_order_relaxed) % size(), frame);
    return ticket<R>{state};
  }

  /// schedule + sync_wait.
  template <typename F, typename... Args>
  auto run(F fn, Args&&... args) -> detail::task_result_t<F&, Args...> {
    return schedule(std::move(fn), std::forward<Args>(args)...).get();
  }

 private:
  struct worker : worker_context {
    using worker_context::worker_context;

    victim_table victims;
    std::size_t group = 0;
    segmented_stack* home = nullptr; // the stack held while idle, handed back at exit
    alignas(64) std::atomic<bool> sleeping = false;
    std::atomic<std::uint32_t> token = 0;
    std::thread thread;
  };

  struct group_state {
    std::vector<std::size_t> members;
    std::atomic<int> awake_thieves = 0;
    std::atomic<int> sleepers = 0;
  };

  // --- executor hooks -------------------------------------------------------

  void submit_to(std::size_t target, frame_header* frame) override {
    worker& w = *workers_.at(target);
    w.inbox.push(frame);
    if (kind_ == scheduler_kind::lazy) {
      wake(w);
    }
  }

  [[nodiscard]] auto worker_count() const noexcept -> std::size_t override { return workers_.size(); }

  void on_fork(worker_context& ctx) noexcept override {
    auto& g = groups_[static_cast<worker&>(ctx).group];
    if (g.sleepers.load(std::memory_order_relaxed) > 0 && g.awake_thieves.load(std::memory_order_relaxed) == 0) {
      wake_one(g);
    }
  }

  // --- worker loop ----------------------------------------------------------

  void worker_main(worker& w) {
    tls::worker = &w;
    tls::stack = w.home;
    pin(w);

    std::size_t const patience = 2 * size();
    std::size_t failed = 0;

    while (!stopped_.load(std::memory_order_acquire)) {
      FORKLINE_ASSERT(tls::stack->empty() && w.wsq.empty(), "worker returned to the scheduler holding work");

      if (frame_header* f = take_submission(w)) {
        become_active(w);
        detail::adopt_stack(w, f->stack());
        detail::trampoline(w, f);
        become_thief(w);
        failed = 0;
        continue;
      }

      if (!w.victims.empty()) {
        std::size_t const v = w.victims.select(w.rng);
        auto stolen = workers_[v]->wsq.steal();
        if (stolen.tag == steal_tag::success) {
          frame_header* f = stolen.item;
          f->steals.fetch_add(1, std::memory_order_release);
          runtime_stats::bump(stats().steals);
          become_active(w);
          detail::trampoline(w, f);
          become_thief(w);
          failed = 0;
          continue;
        }
        if (stolen.tag == steal_tag::abort) {
          continue; // contention, retry immediately against a fresh victim
        }
      }

      if (kind_ == scheduler_kind::lazy && ++failed >= patience) {
        try_sleep(w);
        failed = 0;
        continue;
      }
      backoff();
    }

    w.home = tls::stack;
    tls::stack = nullptr;
    tls::worker = nullptr;
  }

  static auto take_submission(worker& w) noexcept -> frame_header* {
    if (w.pending == nullptr) {
      if (w.inbox.empty()) {
        return nullptr;
      }
      w.pending = w.inbox.take_all();
    }
    frame_header* f = w.pending;
    if (f != nullptr) {
      w.pending = f->link;
      f->link = nullptr;
    }
    return f;
  }

  void backoff() const noexcept {
    if (kind_ == scheduler_kind::busy) {
      std::this_thread::yield();
      return;
    }
    auto const until = std::chrono::steady_clock::now() + std::chrono::microseconds(1);
    do {
      std::this_thread::yield();
    } while (std::chrono::steady_clock::now() < until);
  }

  // Synthetic layouts carry no cpu ids and leave threads unpinned.
  void pin(worker& w) const noexcept {
#if defined(__linux__)
    if (auto cpu = topo_.cpu(w.id)) {
      cpu_set_t set;
      CPU_ZERO(&set);
      CPU_SET(*cpu, &set);
      pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
    }
#else
    (void)w;
#endif
  }

  // --- lazy scheduling ------------------------------------------------------
  //
  // Every worker is either active (running a task), an awake thief, or asleep.
  // While any worker is active each group keeps at least one awake thief;
  // with nothing active anywhere everyone may sleep.

  void become_active(worker& w) noexcept {
    if (kind_ != scheduler_kind::lazy) {
      return;
    }
    auto& g = groups_[w.group];
    int const thieves_left = g.awake_thieves.fetch_sub(1, std::memory_order_seq_cst) - 1;
    if (active_.fetch_add(1, std::memory_order_seq_cst) == 0) {
      for (auto& other : groups_) {
        if (other.awake_thieves.load(std::memory_order_seq_cst) == 0) {
          wake_one(other);
        }
      }
    } else if (thieves_left == 0) {
      wake_one(g);
    }
  }

  void become_thief(worker& w) noexcept {
    if (kind_ != scheduler_kind::lazy) {
      return;
    }
    active_.fetch_sub(1, std::memory_order_seq_cst);
    groups_[w.group].awake_thieves.fetch_add(1, std::memory_order_seq_cst);
  }

  void try_sleep(worker& w) noexcept {
    auto& g = groups_[w.group];
    if (active_.load(std::memory_order_seq_cst) > 0 && g.awake_thieves.load(std::memory_order_seq_cst) <= 1) {
      return; // the group's last awake thief stays up while there is work somewhere
    }
    if (w.pending != nullptr || !w.inbox.empty()) {
      return;
    }

    g.awake_thieves.fetch_sub(1, std::memory_order_seq_cst);
    g.sleepers.fetch_add(1, std::memory_order_seq_cst);
    w.sleeping.store(true, std::memory_order_seq_cst);

    bool const cancel = stopped_.load(std::memory_order_seq_cst) || !w.inbox.empty() ||
                        (active_.load(std::memory_order_seq_cst) > 0 && g.awake_thieves.load(std::memory_order_seq_cst) == 0);
    if (cancel) {
      if (w.sleeping.exchange(false, std::memory_order_seq_cst)) {
        g.sleepers.fetch_sub(1, std::memory_order_seq_cst);
        g.awake_thieves.fetch_add(1, std::memory_order_seq_cst);
        return;
      }
      // A waker claimed us first; its token is on the way.
    } else {
      runtime_stats::bump(stats().sleeps);
      if (w.has_local_work()) {
        runtime_stats::bump(stats().greedy_violations);
      }
    }
    w.token.wait(0, std::memory_order_acquire);
    w.token.store(0, std::memory_order_relaxed);
  }

  /// Wake `w` if it is asleep. The waker performs the sleeper's bookkeeping.
  auto wake(worker& w) noexcept -> bool {
    if (!w.sleeping.load(std::memory_order_seq_cst) || !w.sleeping.exchange(false, std::memory_order_seq_cst)) {
      return false;
    }
    auto& g = groups_[w.group];
    g.sleepers.fetch_sub(1, std::memory_order_seq_cst);
    g.awake_thieves.fetch_add(1, std::memory_order_seq_cst);
    runtime_stats::bump(stats().wakeups);
    w.token.store(1, std::memory_order_release);
    w.token.notify_one();
    return true;
  }

  void wake_one(group_state& g) noexcept {
    if (g.sleepers.load(std::memory_order_seq_cst) == 0) {
      return;
    }
    for (std::size_t m : g.members) {
      if (wake(*workers_[m])) {
        return;
      }
    }
  }

  scheduler_kind kind_;
  forkline::topology topo_;
  std::vector<std::unique_ptr<worker>> workers_;
  std::vector<group_state> groups_;
  alignas(64) std::atomic<int> active_ = 0;
  alignas(64) std::atomic<std::size_t> next_root_ = 0;
  std::atomic<bool> stopped_ = false;
};

} // namespace forkline
