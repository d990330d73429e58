#pragma once

#include <atomic>
#include <coroutine>
#include <cstdint>

#include "forkline/core/stack.hpp"

namespace forkline {

enum class frame_kind : std::uint8_t { root, call, fork };

namespace detail {

/// Completion slot shared between a root task and the external thread waiting
/// on it. Reference counted: one reference for the frame, one for the ticket.
struct root_state_base {
  virtual ~root_state_base() = default;

  void signal() noexcept {
    done.store(true, std::memory_order_release);
    done.notify_all();
    drop();
  }

  void wait() const noexcept { done.wait(false, std::memory_order_acquire); }

  [[nodiscard]] auto ready() const noexcept -> bool { return done.load(std::memory_order_acquire); }

  void drop() noexcept {
    if (refs.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      delete this;
    }
  }

  std::atomic<int> refs = 2;
  std::atomic<bool> done = false;
};

} // namespace detail

/// Per-task record living at the front of every task's promise.
///
/// The join protocol uses a split counter: `joins` starts at `sentinel`; each
/// child stranded by a theft subtracts one when it completes, and the frame's
/// executor subtracts (sentinel - steals) on reaching its join. Whoever brings
/// the counter to exactly zero is the last participant and resumes the frame.
struct frame_header {
  static constexpr std::int64_t sentinel = std::int64_t{1} << 31;

  frame_header* parent = nullptr;
  forkline::stacklet* stacklet = nullptr; // holds this frame; stacklet->owner is the frame's stack
  std::coroutine_handle<> handle;
  std::atomic<std::uint32_t> steals = 0;
  std::atomic<std::uint32_t> decrements = 0; // stranded-child decrements since the last reset
  std::atomic<std::int64_t> joins = sentinel;
  frame_kind kind = frame_kind::root;
  bool in_scope = false; // between the first fork and its join
  frame_header* link = nullptr;           // submission-queue linkage
  detail::root_state_base* root = nullptr; // set for root tasks only

  [[nodiscard]] auto stack() const noexcept -> segmented_stack* { return stacklet->owner; }
};

} // namespace forkline
