#include "tollplaza/gateway.hpp"

#include "tollplaza/errors.hpp"

namespace tollplaza {

namespace {
constexpr std::int64_t kDayMs = 86'400'000;
}

Json stats_to_json(const StatsSnapshot& s) {
  Json per_class = Json::object();
  for (const auto& [k, v] : s.per_class) per_class[k] = v;
  return {{"live_tracks", s.live_tracks},
          {"transactions_today", s.transactions_today},
          {"mean_locked_confidence", round6(s.mean_locked_confidence)},
          {"review_queue_depth", s.review_queue_depth},
          {"per_class", per_class},
          {"as_of_ms", s.as_of_ms}};
}

StatsSnapshot compute_stats(const std::vector<StoreRecord>& records, std::size_t live_tracks, std::int64_t now_ms) {
  StatsSnapshot s;
  s.live_tracks = live_tracks;
  s.as_of_ms = now_ms;
  const std::int64_t today = now_ms / kDayMs;
  double locked_sum = 0.0;
  std::size_t locked = 0;
  for (const auto& r : records) {
    const auto& t = r.transaction;
    if (!r.archived && t.review_required) ++s.review_queue_depth;
    if (t.created_at / kDayMs != today) continue;
    ++s.transactions_today;
    ++s.per_class[t.vehicle_class];
    if (t.plate_status == PlateStatus::Locked) {
      locked_sum += t.fused_confidence;
      ++locked;
    }
  }
  s.mean_locked_confidence = locked ? locked_sum / static_cast<double>(locked) : 0.0;
  return s;
}

Json correction_payload(const TollTransaction& txn, const std::string& operator_id) {
  return {{"track_id", txn.track_id},
          {"transaction_id", txn.transaction_id},
          {"frame_index", nullptr},
          {"text", txn.plate_text},
          {"fused_confidence", round6(txn.fused_confidence)},
          {"status", std::string(to_string(txn.plate_status))},
          {"review_required", txn.review_required},
          {"operator_id", operator_id},
          {"source", "correction"}};
}

Gateway::Gateway(TransactionStore& store, EventHub& hub, std::vector<PlateFormat> formats, Alphabet alphabet,
                 GatewaySettings settings, WallClock clock)
    : store_(store),
      hub_(hub),
      formats_(std::move(formats)),
      alphabet_(std::move(alphabet)),
      settings_(settings),
      clock_(std::move(clock)) {}

std::vector<TollTransaction> Gateway::get_transactions(std::optional<std::size_t> window, bool review_only) {
  const std::size_t n = window.value_or(settings_.default_window);
  if (n == 0) throw ValidationError("window must be >= 1");
  return store_.recent(n, review_only);
}

TollTransaction Gateway::post_plate_correction(const CorrectionRequest& req) {
  if (req.corrected_text.empty()) throw ValidationError("corrected_text is empty");
  if (!alphabet_.accepts(req.corrected_text)) {
    throw ValidationError("corrected_text '" + req.corrected_text + "' has characters outside the plate alphabet");
  }
  if (!req.override_format && !validate_format(req.corrected_text, formats_)) {
    throw ValidationError("corrected_text '" + req.corrected_text + "' matches no configured plate format");
  }
  TollTransaction out;
  hub_.publish_after([&]() -> std::optional<EventMessage> {
    out = store_.amend_plate(req.transaction_id, req.corrected_text, req.operator_id);
    return EventMessage{EventType::PlateUpdated, correction_payload(out, req.operator_id), 0};
  });
  return out;
}

StatsSnapshot Gateway::get_stats() {
  return compute_stats(store_.snapshot(), live_tracks_.load(std::memory_order_relaxed), clock_());
}

}  // namespace tollplaza
