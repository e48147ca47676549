#include "tollplaza/event_hub.hpp"

#include <algorithm>

#include "tollplaza/errors.hpp"

namespace tollplaza {

namespace {

constexpr std::pair<EventType, std::string_view> kTypeNames[] = {
    {EventType::TrackCreated, "TrackCreated"},
    {EventType::TrackUpdated, "TrackUpdated"},
    {EventType::PlateUpdated, "PlateUpdated"},
    {EventType::AxleUpdated, "AxleUpdated"},
    {EventType::TransactionFinalized, "TransactionFinalized"},
    {EventType::StatsSnapshot, "StatsSnapshot"},
};

TrackStatus status_after(TrackEventType type) {
  switch (type) {
    case TrackEventType::Created: return TrackStatus::Tentative;
    case TrackEventType::Activated:
    case TrackEventType::Reacquired: return TrackStatus::Active;
    case TrackEventType::Occluded: return TrackStatus::Occluded;
    case TrackEventType::Exited: return TrackStatus::Exited;
  }
  return TrackStatus::Tentative;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(EventType type) {
  for (const auto& [t, name] : kTypeNames) {
    if (t == type) return name;
  }
  return "Unknown";
}

std::optional<EventType> event_type_from_string(std::string_view name) {
  for (const auto& [t, n] : kTypeNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::set<EventType> parse_type_filter(std::string_view csv) {
  std::set<EventType> out;
  while (!csv.empty()) {
    const auto comma = csv.find(',');
    auto token = csv.substr(0, comma);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      const auto t = event_type_from_string(token);
      if (!t) throw ValidationError("unknown event type '" + std::string(token) + "'");
      out.insert(*t);
    }
    if (comma == std::string_view::npos) break;
    csv.remove_prefix(comma + 1);
  }
  return out;
}

std::string EventMessage::to_wire() const {
  return Json{{"type", std::string(to_string(type))}, {"sequence_number", sequence_number}, {"payload", payload}}.dump();
}

EventMessage EventMessage::from_wire(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    const auto type = event_type_from_string(j.at("type").get<std::string>());
    if (!type) throw FormatError("unknown event type " + j.at("type").dump());
    return {*type, j.at("payload"), j.at("sequence_number").get<std::uint64_t>()};
  } catch (const Json::exception& e) {
    throw FormatError(std::string("event message: ") + e.what());
  }
}

EventMessage to_message(const PipelineEvent& event) {
  return std::visit(
      Overloaded{
          [](const TrackEvent& e) {
            Json p{{"track_id", e.track_id},
                   {"frame_index", e.frame_index},
                   {"timestamp_ms", e.timestamp_ms},
                   {"event", std::string(to_string(e.type))},
                   {"status", std::string(to_string(status_after(e.type)))}};
            return EventMessage{e.type == TrackEventType::Created ? EventType::TrackCreated : EventType::TrackUpdated,
                                std::move(p), 0};
          },
          [](const PlateUpdate& e) {
            Json p{{"track_id", e.track_id},
                   {"transaction_id", nullptr},
                   {"frame_index", e.frame_index},
                   {"text", e.text},
                   {"fused_confidence", round6(e.fused_confidence)},
                   {"status", std::string(to_string(e.status))},
                   {"source", "pipeline"}};
            return EventMessage{EventType::PlateUpdated, std::move(p), 0};
          },
          [](const AxleUpdate& e) {
            Json p{{"track_id", e.track_id},
                   {"frame_index", e.frame_index},
                   {"validated_count", e.validated_count},
                   {"temporal_confidence", round6(e.temporal_confidence)}};
            return EventMessage{EventType::AxleUpdated, std::move(p), 0};
          },
          [](const TollTransaction& t) {
            return EventMessage{EventType::TransactionFinalized, transaction_to_json(t), 0};
          },
      },
      event);
}

Subscription::Subscription(std::uint64_t id, std::set<EventType> filter, std::size_t capacity)
    : id_(id), filter_(std::move(filter)), capacity_(capacity) {}

bool Subscription::offer(const EventMessage& message) {
  {
    std::lock_guard lock(mu_);
    if (!connected_) return false;
    if (queue_.size() >= capacity_) {
      connected_ = false;
      reason_ = "buffer overflow: more than " + std::to_string(capacity_) + " undelivered events";
      queue_.clear();
    } else {
      queue_.push_back(message);
      queue_.back().sequence_number = next_sequence_++;
    }
  }
  cv_.notify_one();
  notify();
  std::lock_guard lock(mu_);
  return connected_;
}

void Subscription::disconnect(std::string reason) {
  {
    std::lock_guard lock(mu_);
    if (!connected_) return;
    connected_ = false;
    reason_ = std::move(reason);
  }
  cv_.notify_all();
  notify();
}

void Subscription::notify() {
  std::function<void()> n;
  {
    std::lock_guard lock(mu_);
    n = notifier_;
  }
  if (n) n();
}

void Subscription::set_notifier(std::function<void()> notifier) {
  std::lock_guard lock(mu_);
  notifier_ = std::move(notifier);
}

std::optional<EventMessage> Subscription::try_pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  auto m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<EventMessage> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || !connected_; });
  if (queue_.empty()) return std::nullopt;
  auto m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

bool Subscription::connected() const {
  std::lock_guard lock(mu_);
  return connected_;
}

std::string Subscription::disconnect_reason() const {
  std::lock_guard lock(mu_);
  return reason_;
}

std::size_t Subscription::queued() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

EventHub::EventHub(std::size_t default_capacity) : default_capacity_(default_capacity) {
  if (default_capacity_ == 0) throw ValidationError("event hub capacity must be positive");
}

std::shared_ptr<Subscription> EventHub::subscribe(std::set<EventType> filter, std::size_t capacity) {
  std::lock_guard lock(mu_);
  auto sub = std::make_shared<Subscription>(next_id_++, std::move(filter), capacity ? capacity : default_capacity_);
  subs_.push_back(sub);
  return sub;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& sub, std::string reason) {
  {
    std::lock_guard lock(mu_);
    std::erase(subs_, sub);
  }
  sub->disconnect(std::move(reason));
}

void EventHub::publish(const EventMessage& message) {
  std::lock_guard lock(mu_);
  ++published_;
  for (auto it = subs_.begin(); it != subs_.end();) {
    auto& sub = *it;
    if (!sub->accepts(message.type)) {
      ++it;
      continue;
    }
    if (!sub->offer(message)) {
      ++overflows_;
      it = subs_.erase(it);
    } else {
      ++it;
    }
  }
}

void EventHub::publish_after(const std::function<std::optional<EventMessage>()>& commit) {
  std::lock_guard lock(commit_mu_);
  if (auto m = commit()) publish(*m);
}

std::size_t EventHub::subscriber_count() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

std::uint64_t EventHub::published_count() const {
  std::lock_guard lock(mu_);
  return published_;
}

std::uint64_t EventHub::overflow_disconnects() const {
  std::lock_guard lock(mu_);
  return overflows_;
}

}  // namespace tollplaza
