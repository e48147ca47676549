#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tollplaza/config.hpp"
#include "tollplaza/event_hub.hpp"
#include "tollplaza/plate_ensemble.hpp"
#include "tollplaza/transaction_store.hpp"

namespace tollplaza {

struct StatsSnapshot {
  std::size_t live_tracks = 0;
  std::size_t transactions_today = 0;
  double mean_locked_confidence = 0.0;  ///< over today's Locked transactions
  std::size_t review_queue_depth = 0;   ///< unarchived records with review_required
  std::map<std::string, std::size_t> per_class;  ///< today's transactions by vehicle class
  std::int64_t as_of_ms = 0;
  friend bool operator==(const StatsSnapshot&, const StatsSnapshot&) = default;
};

Json stats_to_json(const StatsSnapshot& stats);

/// Pure: every counter comes from the one record list passed in. "Today" is
/// the UTC day containing `now_ms`.
StatsSnapshot compute_stats(const std::vector<StoreRecord>& records, std::size_t live_tracks, std::int64_t now_ms);

struct CorrectionRequest {
  std::string transaction_id;
  std::string corrected_text;
  std::string operator_id;
  bool override_format = false;
};

/// Query and correction surface shared by the HTTP endpoints and in-process
/// callers. Holds no pipeline state beyond the live-track gauge.
class Gateway {
 public:
  Gateway(TransactionStore& store, EventHub& hub, std::vector<PlateFormat> formats, Alphabet alphabet,
          GatewaySettings settings = {}, WallClock clock = system_clock_ms);

  /// Window defaults to the configured dashboard window.
  std::vector<TollTransaction> get_transactions(std::optional<std::size_t> window = std::nullopt,
                                                bool review_only = false);

  /// Throws ValidationError (format or alphabet), NotFoundError, ConflictError.
  /// Broadcasts PlateUpdated once the store has the new text.
  TollTransaction post_plate_correction(const CorrectionRequest& request);

  StatsSnapshot get_stats();

  void set_live_tracks(std::size_t n) noexcept { live_tracks_.store(n, std::memory_order_relaxed); }
  const GatewaySettings& settings() const noexcept { return settings_; }

 private:
  TransactionStore& store_;
  EventHub& hub_;
  std::vector<PlateFormat> formats_;
  Alphabet alphabet_;
  GatewaySettings settings_;
  WallClock clock_;
  std::atomic<std::size_t> live_tracks_{0};
};

/// PlateUpdated payload for an operator correction.
Json correction_payload(const TollTransaction& txn, const std::string& operator_id);

}  // namespace tollplaza
