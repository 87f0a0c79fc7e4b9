#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "fsd/prf.hpp"
#include "fsd/types.hpp"

namespace fsd {

/// Thread-safe queue of scored items with a pluggable pop order.
///
///   priority  highest score first, ties in insertion order
///   fifo      insertion order
///   random    uniform choice, index = prf(seed, QUEUE_RANDOM, pop#) mod size
///
/// reset() empties the queue atomically and reports how many entries it
/// dropped. close() wakes blocked consumers for shutdown.
template <typename T>
class ScoredQueue {
 public:
  explicit ScoredQueue(QueueStrategy strategy, std::uint64_t seed = 0)
      : strategy_(strategy), seed_(seed) {}

  ScoredQueue(const ScoredQueue&) = delete;
  ScoredQueue& operator=(const ScoredQueue&) = delete;

  QueueStrategy strategy() const { return strategy_; }

  void push(T item, double score) {
    {
      std::lock_guard lock(mu_);
      entries_.push_back(Entry{std::move(item), score, next_seq_++});
    }
    cv_.notify_one();
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mu_);
    return pop_locked();
  }

  /// Blocks until an item is available or the queue is closed.
  std::optional<T> wait_pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !entries_.empty(); });
    return pop_locked();
  }

  std::size_t reset() {
    std::lock_guard lock(mu_);
    std::size_t dropped = entries_.size();
    entries_.clear();
    return dropped;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }
  bool empty() const { return size() == 0; }

 private:
  struct Entry {
    T item;
    double score;
    std::uint64_t seq;
  };

  std::optional<T> pop_locked() {
    if (entries_.empty()) return std::nullopt;
    std::size_t idx = 0;
    switch (strategy_) {
      case QueueStrategy::fifo:
        break;
      case QueueStrategy::priority: {
        // Entries are stored in insertion order, so the first maximum wins ties.
        for (std::size_t i = 1; i < entries_.size(); ++i) {
          if (entries_[i].score > entries_[idx].score) idx = i;
        }
        break;
      }
      case QueueStrategy::random:
        idx = static_cast<std::size_t>(prf::eval(seed_, prf::tag::kQueueRandom, random_pops_++) %
                                       entries_.size());
        break;
    }
    T item = std::move(entries_[idx].item);
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(idx));
    return item;
  }

  QueueStrategy strategy_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Entry> entries_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t random_pops_ = 0;
  bool closed_ = false;
};

}  // namespace fsd
