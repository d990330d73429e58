#pragma once

#include <concepts>
#include <coroutine>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <type_traits>
#include <utility>

#include "forkline/core/assert.hpp"
#include "forkline/core/context.hpp"
#include "forkline/core/frame.hpp"

namespace forkline {

template <typename T = void>
class task;

/// Awaiting `join` waits for every child forked since the previous join.
struct join_t {};
inline constexpr join_t join{};

namespace detail {

template <typename T>
struct promise;

/// Marker base for the awaitables a task is allowed to co_await.
struct protocol_awaitable {};

template <typename A>
concept task_awaitable = std::derived_from<std::remove_cvref_t<A>, protocol_awaitable>;

// ----------------------------------------------------------------------------
// Return
// ----------------------------------------------------------------------------

/// Runs after the frame has been destroyed: decide who continues.
inline void after_return(worker_context& ctx, frame_header* parent, frame_kind kind, root_state_base* root) noexcept {
  switch (kind) {
    case frame_kind::root:
      ctx.next = nullptr;
      root->signal();
      return;
    case frame_kind::call:
      ctx.next = parent;
      return;
    case frame_kind::fork:
      break;
  }

  if (auto popped = ctx.wsq.pop()) {
    // Nobody stole the parent: carry on with it on this worker and stack.
    FORKLINE_ASSERT(*popped == parent, "owner deque out of sync with the frame chain");
    ctx.next = parent;
    return;
  }

  // The parent was stolen. Implicit join: this child was stranded by exactly
  // one theft and accounts for it with a single decrement.
  segmented_stack* parent_stack = parent->stack();
  bool const own_parent_stack = tls::stack == parent_stack;
  if (own_parent_stack) {
    parent_stack->release();
  }
  parent->decrements.fetch_add(1, std::memory_order_relaxed);
  if (parent->joins.fetch_sub(1, std::memory_order_acq_rel) == 1) {
    // Last to arrive and the parent is already waiting at its join.
    if (own_parent_stack) {
      parent_stack->claim(static_cast<int>(ctx.id));
    } else {
      adopt_stack(ctx, parent_stack);
    }
    reset_join(*parent);
    ctx.next = parent;
    return;
  }
  // Whoever resumes the parent will adopt its stack.
  if (own_parent_stack) {
    tls::stack = ctx.fresh_stack();
    tls::stack->claim(static_cast<int>(ctx.id));
  }
  ctx.next = nullptr;
}

struct final_awaiter {
  static constexpr auto await_ready() noexcept -> bool { return false; }

  template <typename P>
  static void await_suspend(std::coroutine_handle<P> h) noexcept {
    frame_header& self = h.promise();
    FORKLINE_ASSERT(!self.in_scope, "task returned with children it never joined");
    frame_header* parent = self.parent;
    frame_kind const kind = self.kind;
    root_state_base* root = self.root;
    worker_context& ctx = *tls::worker;
    h.destroy();
    after_return(ctx, parent, kind, root);
  }

  static constexpr void await_resume() noexcept {}
};

// ----------------------------------------------------------------------------
// Fork / call
// ----------------------------------------------------------------------------

struct fork_awaitable : protocol_awaitable {
  frame_header* child;

  static constexpr auto await_ready() noexcept -> bool { return false; }

  template <typename P>
  void await_suspend(std::coroutine_handle<P> parent) const noexcept {
    frame_header& p = parent.promise();
    worker_context& ctx = *tls::worker;
    child->parent = &p;
    child->kind = frame_kind::fork;
    p.in_scope = true;
    ctx.next = child;
    // Once pushed the parent may be resumed by a thief; nothing below may touch it.
    ctx.wsq.push(&p);
    if (ctx.notify_forks) {
      ctx.exec->on_fork(ctx);
    }
  }

  static constexpr void await_resume() noexcept {}
};

struct call_awaitable : protocol_awaitable {
  frame_header* child;

  static constexpr auto await_ready() noexcept -> bool { return false; }

  template <typename P>
  void await_suspend(std::coroutine_handle<P> parent) const noexcept {
    child->parent = &parent.promise();
    child->kind = frame_kind::call;
    tls::worker->next = child;
  }

  static constexpr void await_resume() noexcept {}
};

// ----------------------------------------------------------------------------
// Join
// ----------------------------------------------------------------------------

struct join_awaiter {
  frame_header* self;

  auto await_ready() const noexcept -> bool {
    self->in_scope = false;
    auto const steals = self->steals.load(std::memory_order_acquire);
    if (steals == 0) {
      return true; // never stolen: every child already ran to completion on this worker
    }
    if (self->joins.load(std::memory_order_acquire) == frame_header::sentinel - steals) {
      // Every stranded child has already checked in.
      finish();
      return true;
    }
    return false;
  }

  auto await_suspend(std::coroutine_handle<>) const noexcept -> bool {
    std::int64_t const share = frame_header::sentinel - self->steals.load(std::memory_order_relaxed);
    worker_context& ctx = *tls::worker;
    ctx.next = nullptr;
    if (self->joins.fetch_sub(share, std::memory_order_acq_rel) == share) {
      finish();
      return false; // last participant: continue past the join right here
    }
    // A child still running will resume this frame.
    return true;
  }

  static constexpr void await_resume() noexcept {}

 private:
  void finish() const noexcept {
    adopt_stack(*tls::worker, self->stack());
    reset_join(*self);
  }
};

// ----------------------------------------------------------------------------
// Migration
// ----------------------------------------------------------------------------

struct migrate_awaitable : protocol_awaitable {
  std::size_t target;

  auto await_ready() const -> bool {
    worker_context& ctx = *tls::worker;
    FORKLINE_REQUIRE(target < ctx.exec->worker_count(), "migrate_to: no such worker");
    return target == ctx.id;
  }

  template <typename P>
  void await_suspend(std::coroutine_handle<P> h) const {
    frame_header& self = h.promise();
    worker_context& ctx = *tls::worker;
    FORKLINE_ASSERT(!self.in_scope, "migrate_to inside a fork-join scope");
    FORKLINE_ASSERT(ctx.wsq.empty(), "migrate_to with stealable continuations pending");
    FORKLINE_ASSERT(self.stack() == tls::stack, "migrating task does not own its stack");
    runtime_stats::bump(stats().migrations);
    // The target adopts this stack when it picks the frame up.
    release_stack(ctx);
    ctx.next = nullptr;
    ctx.exec->submit_to(target, &self);
  }

  static constexpr void await_resume() noexcept {}
};

// ----------------------------------------------------------------------------
// Stack allocation from within a task
// ----------------------------------------------------------------------------

template <typename T>
struct alloc_request {
  std::size_t count;
};

template <typename T>
struct dealloc_request {
  T* ptr;
  std::size_t count;
};

template <typename T>
struct ready_value {
  T value;
  static constexpr auto await_ready() noexcept -> bool { return true; }
  static constexpr void await_suspend(std::coroutine_handle<>) noexcept {}
  constexpr auto await_resume() const noexcept -> T { return value; }
};

// ----------------------------------------------------------------------------
// Promise
// ----------------------------------------------------------------------------

struct promise_base : frame_header {
  promise_base() noexcept { stacklet = tls::stack->top(); }

  static auto operator new(std::size_t bytes) -> void* {
    FORKLINE_ASSERT(tls::stack != nullptr, "tasks must be created by a pool worker or pool::schedule");
    return tls::stack->allocate(bytes);
  }

  static void operator delete(void* ptr, std::size_t bytes) noexcept { tls::stack->deallocate(ptr, bytes); }

  static auto initial_suspend() noexcept -> std::suspend_always { return {}; }
  static auto final_suspend() noexcept -> final_awaiter { return {}; }

  // Exceptions do not propagate across joins.
  [[noreturn]] static void unhandled_exception() noexcept { std::terminate(); }

  template <task_awaitable A>
  static auto await_transform(A&& a) -> std::remove_cvref_t<A> {
    return std::forward<A>(a);
  }

  template <typename T>
  auto await_transform(alloc_request<T> req) noexcept -> ready_value<T*> {
    FORKLINE_ASSERT(!in_scope, "frame_alloc inside a fork-join scope");
    FORKLINE_ASSERT(stack() == tls::stack, "frame_alloc on a stack the worker does not own");
    auto* first = static_cast<T*>(tls::stack->allocate(req.count * sizeof(T)));
    std::uninitialized_value_construct_n(first, req.count);
    return {first};
  }

  template <typename T>
  auto await_transform(dealloc_request<T> req) noexcept -> ready_value<std::nullptr_t> {
    FORKLINE_ASSERT(!in_scope, "frame_dealloc inside a fork-join scope");
    tls::stack->deallocate(static_cast<void*>(req.ptr), req.count * sizeof(T));
    return {nullptr};
  }

  auto await_transform(join_t) noexcept -> join_awaiter;
};

template <typename T>
struct promise : promise_base {
  promise() noexcept { handle = std::coroutine_handle<promise>::from_promise(*this); }

  auto get_return_object() noexcept -> task<T>;

  template <typename U = T>
    requires std::is_assignable_v<T&, U&&>
  void return_value(U&& value) {
    if (result != nullptr) {
      *result = std::forward<U>(value);
    }
  }

  T* result = nullptr;
};

template <>
struct promise<void> : promise_base {
  promise() noexcept { handle = std::coroutine_handle<promise>::from_promise(*this); }

  auto get_return_object() noexcept -> task<void>;

  static void return_void() noexcept {}
};

} // namespace detail

inline auto detail::promise_base::await_transform(join_t) noexcept -> join_awaiter { return {this}; }

/// The return type of a forkline coroutine. Frames live on the worker's
/// segmented stack; a task only runs once handed to fork, call or a pool.
template <typename T>
class [[nodiscard]] task {
 public:
  using value_type = T;
  using promise_type = detail::promise<T>;

  task(task&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  task(task const&) = delete;
  auto operator=(task&&) -> task& = delete;
  auto operator=(task const&) -> task& = delete;

  ~task() {
    if (handle_) {
      handle_.destroy();
    }
  }

  /// Hand the suspended frame over to the runtime.
  auto release() noexcept -> promise_type* { return &std::exchange(handle_, {}).promise(); }

 private:
  friend promise_type;
  explicit task(std::coroutine_handle<promise_type> h) noexcept : handle_(h) {}

  std::coroutine_handle<promise_type> handle_;
};

template <typename T>
auto detail::promise<T>::get_return_object() noexcept -> task<T> {
  return task<T>{std::coroutine_handle<promise<T>>::from_promise(*this)};
}

inline auto detail::promise<void>::get_return_object() noexcept -> task<void> {
  return task<void>{std::coroutine_handle<promise<void>>::from_promise(*this)};
}

namespace detail {

template <typename F, typename... Args>
using task_result_t = typename std::invoke_result_t<F, Args...>::value_type;

/// Create the child frame (on the current stack) and point its result at `out`.
template <typename Out, typename F, typename... Args>
auto spawn(Out* out, F& fn, Args&&... args) -> frame_header* {
  using R = task_result_t<F&, Args...>;
  auto* child = std::invoke(fn, std::forward<Args>(args)...).release();
  if constexpr (!std::is_void_v<R>) {
    if constexpr (std::is_void_v<Out>) {
      child->result = nullptr;
    } else {
      static_assert(std::is_same_v<Out, R>, "result address must match the task's value type");
      child->result = out;
    }
  }
  return child;
}

template <typename Awaitable, typename Out, typename F>
struct binder {
  Out* out;
  F fn;

  template <typename... Args>
  auto operator()(Args&&... args) && -> Awaitable {
    return Awaitable{{}, spawn(out, fn, std::forward<Args>(args)...)};
  }
};

} // namespace detail

/// `co_await fork(&out, fn)(args...)`: run fn(args...) now and expose the
/// caller's continuation to thieves. The result lands in `out` by the next join.
template <typename R, typename F>
auto fork(R* out, F fn) -> detail::binder<detail::fork_awaitable, R, F> {
  return {out, std::move(fn)};
}

/// Fork whose result (if any) is discarded.
template <typename F>
auto fork(F fn) -> detail::binder<detail::fork_awaitable, void, F> {
  return {nullptr, std::move(fn)};
}

/// `co_await call(&out, fn)(args...)`: like fork but the continuation is not
/// stealable; the child returns straight to the caller.
template <typename R, typename F>
auto call(R* out, F fn) -> detail::binder<detail::call_awaitable, R, F> {
  return {out, std::move(fn)};
}

template <typename F>
auto call(F fn) -> detail::binder<detail::call_awaitable, void, F> {
  return {nullptr, std::move(fn)};
}

/// `T* buf = co_await frame_alloc<T>(n)`: n value-initialized objects on the
/// task's own stack. Only valid outside a fork-join scope; release in FILO
/// order with frame_dealloc before the task returns.
template <typename T = std::byte>
  requires std::is_trivially_destructible_v<T> && (alignof(T) <= segmented_stack::alignment)
auto frame_alloc(std::size_t count) -> detail::alloc_request<T> {
  return {count};
}

template <typename T>
auto frame_dealloc(T* ptr, std::size_t count) -> detail::dealloc_request<T> {
  return {ptr, count};
}

/// `co_await migrate_to(w)`: continue the calling task on worker w. Only valid
/// outside a fork-join scope.
inline auto migrate_to(std::size_t worker) noexcept -> detail::migrate_awaitable { return {{}, worker}; }

/// Id of the worker executing the calling task.
inline auto current_worker() noexcept -> std::size_t {
  FORKLINE_ASSERT(tls::worker != nullptr, "not on a worker thread");
  return tls::worker->id;
}

} // namespace forkline
