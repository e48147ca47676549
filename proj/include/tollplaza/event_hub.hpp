#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tollplaza/pipeline.hpp"
#include "tollplaza/trace_io.hpp"

namespace tollplaza {

enum class EventType { TrackCreated, TrackUpdated, PlateUpdated, AxleUpdated, TransactionFinalized, StatsSnapshot };

std::string_view to_string(EventType type);
std::optional<EventType> event_type_from_string(std::string_view name);

/// Parses a comma-separated type list; empty input means every type.
/// Throws ValidationError on an unknown name.
std::set<EventType> parse_type_filter(std::string_view csv);

struct EventMessage {
  EventType type = EventType::StatsSnapshot;
  Json payload;
  std::uint64_t sequence_number = 0;  ///< per subscriber, assigned at enqueue

  /// {"type":..., "sequence_number":..., "payload":{...}}
  std::string to_wire() const;
  static EventMessage from_wire(std::string_view text);
};

/// Bus event to dashboard message. Payload schema is fixed per type.
EventMessage to_message(const PipelineEvent& event);

/// Bounded per-client queue. An overflow disconnects the client instead of
/// blocking the publisher.
class Subscription {
 public:
  Subscription(std::uint64_t id, std::set<EventType> filter, std::size_t capacity);

  std::optional<EventMessage> try_pop();
  /// Waits up to `timeout`; nullopt on timeout or once disconnected and drained.
  std::optional<EventMessage> pop(std::chrono::milliseconds timeout);

  bool connected() const;
  std::string disconnect_reason() const;
  std::size_t queued() const;
  std::uint64_t id() const noexcept { return id_; }
  bool accepts(EventType type) const noexcept { return filter_.empty() || filter_.count(type) > 0; }

  /// Called (outside the queue lock) after every enqueue and on disconnect.
  void set_notifier(std::function<void()> notifier);

 private:
  friend class EventHub;
  bool offer(const EventMessage& message);  // false: overflowed and disconnected
  void disconnect(std::string reason);
  void notify();

  const std::uint64_t id_;
  const std::set<EventType> filter_;
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<EventMessage> queue_;
  std::uint64_t next_sequence_ = 1;
  bool connected_ = true;
  std::string reason_;
  std::function<void()> notifier_;
};

class EventHub {
 public:
  explicit EventHub(std::size_t default_capacity = 1000);

  std::shared_ptr<Subscription> subscribe(std::set<EventType> filter = {}, std::size_t capacity = 0);
  void unsubscribe(const std::shared_ptr<Subscription>& sub, std::string reason = "client closed");

  /// O(subscribers); never blocks on a slow client.
  void publish(const EventMessage& message);
  void publish(const PipelineEvent& event) { publish(to_message(event)); }

  /// Runs `commit` and publishes what it returns as one step relative to every
  /// other publish_after, so a store write and its announcement cannot be
  /// reordered against a concurrent one.
  void publish_after(const std::function<std::optional<EventMessage>()>& commit);

  std::size_t subscriber_count() const;
  std::uint64_t published_count() const;
  std::uint64_t overflow_disconnects() const;

 private:
  std::size_t default_capacity_;
  mutable std::mutex mu_;
  std::mutex commit_mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::uint64_t next_id_ = 1;
  std::uint64_t published_ = 0;
  std::uint64_t overflows_ = 0;
};

}  // namespace tollplaza
