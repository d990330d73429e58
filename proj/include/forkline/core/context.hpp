#pragma once

#include <cstdint>
#include <memory>
#include <random>

#include "forkline/core/assert.hpp"
#include "forkline/core/deque.hpp"
#include "forkline/core/frame.hpp"
#include "forkline/core/stack.hpp"
#include "forkline/core/stats.hpp"
#include "forkline/core/submit_queue.hpp"

namespace forkline {

struct worker_context;

namespace detail {

/// Hooks a scheduler provides to the task protocol.
class executor {
 public:
  virtual void submit_to(std::size_t worker, frame_header* frame) = 0;
  virtual void on_fork(worker_context& ctx) noexcept = 0;
  [[nodiscard]] virtual auto worker_count() const noexcept -> std::size_t = 0;

 protected:
  ~executor() = default;
};

} // namespace detail

/// State owned by one worker thread.
struct worker_context {
  explicit worker_context(std::size_t worker_id, std::uint64_t seed) : id(worker_id), rng(seed) {}

  worker_context(worker_context const&) = delete;
  auto operator=(worker_context const&) -> worker_context& = delete;

  ~worker_context() = default;

  std::size_t id;
  deque<frame_header*> wsq;
  intrusive_mpsc<frame_header, &frame_header::link> inbox;
  frame_header* pending = nullptr;   // items already detached from the inbox
  frame_header* next = nullptr;      // trampoline slot: the frame to resume next
  std::unique_ptr<segmented_stack> spare;
  std::mt19937_64 rng;
  detail::executor* exec = nullptr;
  bool notify_forks = false;         // lazy pools want to hear about forks

  /// An empty stack to continue with after releasing the current one.
  auto fresh_stack() -> segmented_stack* {
    if (spare) {
      return spare.release();
    }
    return new segmented_stack();
  }

  /// Dispose of an empty stack that is no longer owned.
  void recycle(segmented_stack* s) noexcept {
    if (!spare) {
      spare.reset(s);
    } else {
      delete s;
    }
  }

  [[nodiscard]] auto has_local_work() const noexcept -> bool { return pending != nullptr || !wsq.empty(); }
};

namespace tls {

/// The worker running on this thread, if any.
inline thread_local worker_context* worker = nullptr;

/// The stack new frames are allocated on.
inline thread_local segmented_stack* stack = nullptr;

} // namespace tls

namespace detail {

/// Make `target` this worker's stack. The previous stack must be empty.
inline void adopt_stack(worker_context& ctx, segmented_stack* target) noexcept {
  segmented_stack* old = tls::stack;
  if (old == target) {
    return;
  }
  auto& st = stats();
  runtime_stats::bump(st.adoptions);
  if (!old->empty()) {
    runtime_stats::bump(st.adoption_violations);
  }
  FORKLINE_ASSERT(old->empty(), "adopting a stack while still holding frames on another");
  old->release();
  if (target->claim(static_cast<int>(ctx.id)) != -1) {
    runtime_stats::bump(st.owner_violations);
  }
  ctx.recycle(old);
  tls::stack = target;
}

/// Give up the current stack (some other worker will adopt it) and continue on an empty one.
inline void release_stack(worker_context& ctx) {
  tls::stack->release();
  tls::stack = ctx.fresh_stack();
  tls::stack->claim(static_cast<int>(ctx.id));
}

/// The last participant of a join resets the counters before continuing.
inline void reset_join(frame_header& f) noexcept {
  auto& st = stats();
  runtime_stats::bump(st.join_resets);
  if (f.decrements.load(std::memory_order_relaxed) != f.steals.load(std::memory_order_relaxed)) {
    runtime_stats::bump(st.balance_mismatches);
  }
  f.steals.store(0, std::memory_order_relaxed);
  f.decrements.store(0, std::memory_order_relaxed);
  f.joins.store(frame_header::sentinel, std::memory_order_relaxed);
}

/// Resume frames iteratively until none is handed back. Every protocol step
/// that would tail-call another task instead stores it in `ctx.next`, so the
/// native stack depth here is constant however long the chain of tasks.
inline void trampoline(worker_context& ctx, frame_header* frame) noexcept {
  while (frame != nullptr) {
    ctx.next = nullptr;
    frame->handle.resume();
    frame = ctx.next;
  }
}

} // namespace detail

} // namespace forkline
