#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tollplaza/config.hpp"
#include "tollplaza/event_hub.hpp"
#include "tollplaza/gateway.hpp"
#include "tollplaza/pipeline.hpp"
#include "tollplaza/transaction_store.hpp"

namespace tollplaza {

/// Multi-producer multi-consumer FIFO. push blocks while full; pop blocks
/// while empty and returns nullopt once closed and drained.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return take(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mu_);
    return take(lock);
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::optional<T> take(std::unique_lock<std::mutex>&) {
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Nearest-rank percentile, q in [0, 1]. Empty input gives 0.
double percentile(std::vector<double> values, double q);

struct LatencySummary {
  std::size_t count = 0;
  double mean = 0, p50 = 0, p95 = 0, p99 = 0, max = 0;
};
LatencySummary summarize(const std::vector<double>& samples_ms);
Json latency_to_json(const LatencySummary& s);

struct FrameSource {
  std::function<std::optional<FrameDetections>()> next;
  /// Valid once `next` has returned nullopt.
  std::function<std::string()> trace_id;
};

FrameSource vector_source(std::vector<FrameDetections> frames);
/// Streams from `in`; the fingerprint covers the bytes consumed.
FrameSource stream_source(std::istream& in, Alphabet alphabet = Alphabet{});

struct RunnerOptions {
  std::size_t queue_capacity = 64;
  /// Header written before the first frame when known; otherwise after the last.
  std::optional<std::string> trace_id;
  std::chrono::milliseconds linger{0};
  int store_put_attempts = 3;
};

struct RunMetrics {
  std::size_t frames = 0;
  std::size_t batches = 0;
  std::map<int, std::size_t> batch_sizes;
  std::vector<double> core_ms;   ///< tracker + fusion + axles + finalization, per frame
  std::vector<double> frame_ms;  ///< core plus event fan-out, per frame
  std::vector<double> store_put_ms;
  std::size_t transactions = 0;
  std::size_t persisted = 0;
  std::size_t store_failures = 0;
  std::size_t cleanup_runs = 0;
  std::size_t cleanup_failures = 0;
  std::size_t archived = 0;
  std::size_t deleted = 0;
  std::size_t evicted = 0;
  std::uint64_t events_published = 0;
  std::uint64_t overflow_disconnects = 0;
  double wall_ms = 0;
  std::string trace_id;
  std::string error;  ///< input failure that ended the run early
};
Json metrics_to_json(const RunMetrics& m);

/// Wires ingest, the stage thread and the store writer around one pipeline.
///
/// Ingest fills a bounded queue; the stage thread sizes each batch from queue
/// occupancy. Finalized transactions go to a writer thread that persists them
/// and broadcasts TransactionFinalized inside the same publish_after commit,
/// so a correction event for a transaction never precedes its finalization.
class PipelineRunner {
 public:
  PipelineRunner(AppConfig cfg, std::unique_ptr<TransactionStore> store, RunnerOptions options = {},
                 WallClock clock = system_clock_ms);

  EventHub& hub() noexcept { return hub_; }
  Gateway& gateway() noexcept { return gateway_; }
  TransactionStore& store() noexcept { return *store_; }

  /// Blocks until the source is exhausted, every transaction has been handed
  /// to the store, and the linger period has passed. `output` may be null.
  RunMetrics run(FrameSource source, std::ostream* output = nullptr);

 private:
  AppConfig cfg_;
  std::unique_ptr<TransactionStore> store_;
  RunnerOptions options_;
  WallClock clock_;
  EventHub hub_;
  Gateway gateway_;
};

}  // namespace tollplaza
