#pragma once

#include <atomic>

namespace forkline {

/// Lock-free intrusive many-producer single-consumer queue.
///
/// Producers push onto a Treiber stack; the consumer detaches the whole stack
/// in one exchange and reverses it, so items come out in push order per batch.
template <typename T, T* T::*Link>
class intrusive_mpsc {
 public:
  /// Any thread.
  void push(T* item) noexcept {
    T* head = head_.load(std::memory_order_relaxed);
    do {
      item->*Link = head;
    } while (!head_.compare_exchange_weak(head, item, std::memory_order_release, std::memory_order_relaxed));
  }

  /// Consumer only. Returns the detached items as a FIFO list linked through Link.
  auto take_all() noexcept -> T* {
    T* lifo = head_.exchange(nullptr, std::memory_order_acquire);
    T* fifo = nullptr;
    while (lifo != nullptr) {
      T* next = lifo->*Link;
      lifo->*Link = fifo;
      fifo = lifo;
      lifo = next;
    }
    return fifo;
  }

  [[nodiscard]] auto empty() const noexcept -> bool { return head_.load(std::memory_order_seq_cst) == nullptr; }

 private:
  alignas(64) std::atomic<T*> head_ = nullptr;
};

} // namespace forkline
