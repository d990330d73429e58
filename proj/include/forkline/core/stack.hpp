#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <new>
#include <stdexcept>
#include <utility>

#include "forkline/core/assert.hpp"

namespace forkline {

// ----------------------------------------------------------------------------
// Process-wide accounting of stacklet heap memory
// ----------------------------------------------------------------------------

/// Every stacklet allocation and release is reported here, so the peak across
/// all workers' stacks can be read after a run. Reads are meaningful only at
/// quiescent points.
class frame_memory {
 public:
  static auto current() noexcept -> std::size_t { return state().current.load(std::memory_order_relaxed); }
  static auto peak() noexcept -> std::size_t { return state().peak.load(std::memory_order_relaxed); }

  /// Restart peak tracking from the current footprint.
  static void reset_peak() noexcept { state().peak.store(current(), std::memory_order_relaxed); }

  static void on_allocate(std::size_t bytes) noexcept {
    auto now = state().current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    auto prev = state().peak.load(std::memory_order_relaxed);
    while (prev < now && !state().peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
  }

  static void on_release(std::size_t bytes) noexcept { state().current.fetch_sub(bytes, std::memory_order_relaxed); }

 private:
  struct counters {
    std::atomic<std::size_t> current = 0;
    std::atomic<std::size_t> peak = 0;
  };

  static auto state() noexcept -> counters& {
    static counters c;
    return c;
  }
};

class segmented_stack;

/// One contiguous segment of a segmented stack. The header sits at the start
/// of the heap block and the bump-allocation region follows it.
struct alignas(16) stacklet {
  stacklet* prev = nullptr;
  stacklet* next = nullptr;
  std::byte* sp = nullptr;
  std::byte* lo = nullptr;
  std::byte* hi = nullptr;
  segmented_stack* owner = nullptr;

  [[nodiscard]] auto capacity() const noexcept -> std::size_t { return static_cast<std::size_t>(hi - lo); }
  [[nodiscard]] auto used() const noexcept -> std::size_t { return static_cast<std::size_t>(sp - lo); }
  [[nodiscard]] auto empty() const noexcept -> bool { return sp == lo; }
};

static_assert(sizeof(stacklet) == 48);

struct stack_metrics {
  std::size_t live_bytes = 0;
  std::size_t footprint_bytes = 0;
  std::size_t peak_footprint_bytes = 0;
  std::size_t heap_allocations = 0;
  std::size_t stacklets = 0;
};

/// Worst-case heap size of a segmented stack holding `live` bytes with `metadata`
/// bytes of per-stacklet overhead: (floor(log2(2M + 1)) + 1) c + 4M.
constexpr auto segmented_stack_bound(std::size_t live, std::size_t metadata) -> std::size_t {
  if (live == 0) {
    throw std::invalid_argument("segmented_stack_bound: live bytes must be >= 1");
  }
  std::size_t const floor_log2 = static_cast<std::size_t>(std::bit_width(2 * live + 1)) - 1;
  return (floor_log2 + 1) * metadata + 4 * live;
}

/// A geometric segmented stack: a doubly linked chain of stacklets, each twice
/// the size of its predecessor (or large enough for the request that created
/// it). At most one empty stacklet is cached past the top to absorb
/// alloc/dealloc churn across a segment boundary.
///
/// Single owner; allocations must be released in strict FILO order.
class segmented_stack {
 public:
  static constexpr std::size_t initial_capacity = 4096;
  static constexpr std::size_t alignment = 16;
  static constexpr std::size_t metadata_bytes = sizeof(stacklet);

  static constexpr auto round_up(std::size_t bytes) noexcept -> std::size_t {
    bytes = bytes == 0 ? 1 : bytes;
    return (bytes + alignment - 1) & ~(alignment - 1);
  }

  segmented_stack() { top_ = make_stacklet(initial_capacity); }

  segmented_stack(segmented_stack const&) = delete;
  auto operator=(segmented_stack const&) -> segmented_stack& = delete;

  ~segmented_stack() {
    stacklet* s = top_;
    while (s->next != nullptr) {
      s = s->next;
    }
    while (s != nullptr) {
      stacklet* prev = s->prev;
      free_stacklet(s);
      s = prev;
    }
  }

  [[nodiscard]] auto allocate(std::size_t bytes) -> void* {
    std::size_t const n = round_up(bytes);
    if (static_cast<std::size_t>(top_->hi - top_->sp) >= n) [[likely]] {
      return std::exchange(top_->sp, top_->sp + n);
    }
    return allocate_slow(n);
  }

  void deallocate(void* ptr, std::size_t bytes) noexcept {
    std::size_t const n = round_up(bytes);
    FORKLINE_ASSERT(top_->used() >= n && top_->sp - n == static_cast<std::byte*>(ptr), "segmented_stack: deallocation is not FILO");
    top_->sp -= n;
    if (top_->empty() && top_->prev != nullptr) [[unlikely]] {
      retreat();
    }
  }

  [[nodiscard]] auto empty() const noexcept -> bool { return top_->prev == nullptr && top_->empty(); }

  /// The stacklet holding the most recent live allocation.
  [[nodiscard]] auto top() const noexcept -> stacklet* { return top_; }

  [[nodiscard]] auto cached() const noexcept -> stacklet* { return top_->next; }

  [[nodiscard]] auto metrics() const noexcept -> stack_metrics {
    stack_metrics m{};
    m.footprint_bytes = footprint_;
    m.peak_footprint_bytes = peak_footprint_;
    m.heap_allocations = heap_allocations_;
    for (stacklet* s = top_; s != nullptr; s = s->prev) {
      m.live_bytes += s->used();
      ++m.stacklets;
    }
    if (top_->next != nullptr) {
      ++m.stacklets;
    }
    return m;
  }

  // Ownership tag used to check that no two workers hold the same stack.
  // -1 means released.

  auto claim(int worker) noexcept -> int { return owner_.exchange(worker, std::memory_order_relaxed); }
  void release() noexcept { owner_.store(-1, std::memory_order_relaxed); }
  [[nodiscard]] auto owner() const noexcept -> int { return owner_.load(std::memory_order_relaxed); }

 private:
  auto make_stacklet(std::size_t capacity) -> stacklet* {
    void* raw = ::operator new(metadata_bytes + capacity);
    auto* s = ::new (raw) stacklet{};
    s->lo = reinterpret_cast<std::byte*>(s) + metadata_bytes;
    s->sp = s->lo;
    s->hi = s->lo + capacity;
    s->owner = this;
    footprint_ += metadata_bytes + capacity;
    peak_footprint_ = std::max(peak_footprint_, footprint_);
    ++heap_allocations_;
    frame_memory::on_allocate(metadata_bytes + capacity);
    return s;
  }

  void free_stacklet(stacklet* s) noexcept {
    std::size_t const bytes = metadata_bytes + s->capacity();
    footprint_ -= bytes;
    frame_memory::on_release(bytes);
    s->~stacklet();
    ::operator delete(static_cast<void*>(s));
  }

  auto allocate_slow(std::size_t n) -> void* {
    if (stacklet* cached = top_->next; cached != nullptr) {
      if (cached->capacity() >= n) {
        top_ = cached;
        return std::exchange(top_->sp, top_->sp + n);
      }
      top_->next = nullptr;
      free_stacklet(cached);
    }
    stacklet* s = make_stacklet(std::max(2 * top_->capacity(), n));
    s->prev = top_;
    top_->next = s;
    top_ = s;
    return std::exchange(top_->sp, top_->sp + n);
  }

  // Top stacklet just became empty: step back, caching it unless it is
  // oversized relative to its predecessor.
  void retreat() noexcept {
    stacklet* e = top_;
    stacklet* prev = e->prev;
    if (e->next != nullptr) {
      free_stacklet(e->next);
      e->next = nullptr;
    }
    if (e->capacity() > 2 * prev->capacity()) {
      prev->next = nullptr;
      free_stacklet(e);
    }
    top_ = prev;
  }

  stacklet* top_ = nullptr;
  std::size_t footprint_ = 0;
  std::size_t peak_footprint_ = 0;
  std::size_t heap_allocations_ = 0;
  std::atomic<int> owner_ = -1;
};

} // namespace forkline
