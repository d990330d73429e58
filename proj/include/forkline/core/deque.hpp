#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <type_traits>
#include <vector>

#include "forkline/core/assert.hpp"

namespace forkline {

/// Outcome of a steal attempt.
enum class steal_tag : std::uint8_t { empty, abort, success };

template <typename T>
struct steal_result {
  steal_tag tag = steal_tag::empty;
  T item{};

  constexpr explicit operator bool() const noexcept { return tag == steal_tag::success; }
};

/// Chase-Lev work-stealing deque, after the weak-memory formulation of Lê et al.
///
/// The owner thread pushes and pops at the bottom (FILO); any thread may steal
/// from the top (FIFO). Handles must be trivially copyable single words. The
/// ring buffer doubles when full; superseded buffers stay alive until the deque
/// is destroyed because a concurrent thief may still be reading from them.
template <typename T>
  requires std::is_trivially_copyable_v<T> && (sizeof(T) <= sizeof(void*))
class deque {
  static constexpr std::ptrdiff_t k_initial_capacity = 64;

  struct ring {
    explicit ring(std::ptrdiff_t cap) : capacity(cap), mask(cap - 1), slots(new std::atomic<T>[static_cast<std::size_t>(cap)]) {}

    auto load(std::ptrdiff_t i) const noexcept -> T { return slots[static_cast<std::size_t>(i & mask)].load(std::memory_order_relaxed); }
    void store(std::ptrdiff_t i, T x) noexcept { slots[static_cast<std::size_t>(i & mask)].store(x, std::memory_order_relaxed); }

    std::ptrdiff_t capacity;
    std::ptrdiff_t mask;
    std::unique_ptr<std::atomic<T>[]> slots;
  };

 public:
  deque() : deque(k_initial_capacity) {}

  explicit deque(std::ptrdiff_t capacity) {
    FORKLINE_REQUIRE(capacity > 0 && (capacity & (capacity - 1)) == 0, "deque capacity must be a power of two");
    rings_.push_back(std::make_unique<ring>(capacity));
    buffer_.store(rings_.back().get(), std::memory_order_relaxed);
  }

  deque(deque const&) = delete;
  auto operator=(deque const&) -> deque& = delete;

  /// Approximate when called concurrently with steals.
  [[nodiscard]] auto size() const noexcept -> std::size_t {
    auto b = bottom_.load(std::memory_order_relaxed);
    auto t = top_.load(std::memory_order_relaxed);
    return static_cast<std::size_t>(b >= t ? b - t : 0);
  }

  [[nodiscard]] auto empty() const noexcept -> bool { return size() == 0; }

  [[nodiscard]] auto capacity() const noexcept -> std::ptrdiff_t { return buffer_.load(std::memory_order_relaxed)->capacity; }

  /// Number of superseded buffers retained for lagging thieves.
  [[nodiscard]] auto retired_buffers() const noexcept -> std::size_t { return rings_.size() - 1; }

  /// Owner only.
  void push(T x) noexcept {
    auto b = bottom_.load(std::memory_order_relaxed);
    auto t = top_.load(std::memory_order_acquire);
    ring* buf = buffer_.load(std::memory_order_relaxed);

    if (b - t > buf->capacity - 1) [[unlikely]] {
      buf = grow(buf, t, b);
    }

    buf->store(b, x);
    std::atomic_thread_fence(std::memory_order_release);
    bottom_.store(b + 1, std::memory_order_relaxed);
  }

  /// Owner only. Returns the most recently pushed item, if any.
  auto pop() noexcept -> std::optional<T> {
    auto b = bottom_.load(std::memory_order_relaxed) - 1;
    ring* buf = buffer_.load(std::memory_order_relaxed);
    bottom_.store(b, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_seq_cst);
    auto t = top_.load(std::memory_order_relaxed);

    if (t <= b) {
      T x = buf->load(b);
      if (t == b) {
        // Last element: race the thieves for it.
        if (!top_.compare_exchange_strong(t, t + 1, std::memory_order_seq_cst, std::memory_order_relaxed)) {
          bottom_.store(b + 1, std::memory_order_relaxed);
          return std::nullopt;
        }
        bottom_.store(b + 1, std::memory_order_relaxed);
      }
      return x;
    }
    bottom_.store(b + 1, std::memory_order_relaxed);
    return std::nullopt;
  }

  /// Any thread. Returns the oldest item on success.
  auto steal() noexcept -> steal_result<T> {
    auto t = top_.load(std::memory_order_acquire);
    std::atomic_thread_fence(std::memory_order_seq_cst);
    auto b = bottom_.load(std::memory_order_acquire);

    if (t < b) {
      // Acquire pairs with the release store in grow().
      ring* buf = buffer_.load(std::memory_order_acquire);
      T x = buf->load(t);
      if (!top_.compare_exchange_strong(t, t + 1, std::memory_order_seq_cst, std::memory_order_relaxed)) {
        return {steal_tag::abort, {}};
      }
      return {steal_tag::success, x};
    }
    return {steal_tag::empty, {}};
  }

 private:
  auto grow(ring* old, std::ptrdiff_t t, std::ptrdiff_t b) -> ring* {
    auto next = std::make_unique<ring>(old->capacity * 2);
    for (auto i = t; i != b; ++i) {
      next->store(i, old->load(i));
    }
    ring* raw = next.get();
    rings_.push_back(std::move(next));
    buffer_.store(raw, std::memory_order_release);
    return raw;
  }

  alignas(64) std::atomic<std::ptrdiff_t> top_ = 0;
  alignas(64) std::atomic<std::ptrdiff_t> bottom_ = 0;
  alignas(64) std::atomic<ring*> buffer_ = nullptr;
  std::vector<std::unique_ptr<ring>> rings_; // owner-private; front is the oldest
};

} // namespace forkline
