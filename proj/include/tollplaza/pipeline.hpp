#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tollplaza/config.hpp"
#include "tollplaza/kernels.hpp"
#include "tollplaza/tracker.hpp"
#include "tollplaza/transaction.hpp"

namespace tollplaza {

struct PlateUpdate {
  std::uint64_t track_id = 0;
  std::int64_t frame_index = 0;
  std::string text;
  double fused_confidence = 0.0;
  PlateStatus status = PlateStatus::Scanning;
  friend bool operator==(const PlateUpdate&, const PlateUpdate&) = default;
};

struct AxleUpdate {
  std::uint64_t track_id = 0;
  std::int64_t frame_index = 0;
  int validated_count = 0;
  double temporal_confidence = 0.0;
  friend bool operator==(const AxleUpdate&, const AxleUpdate&) = default;
};

/// Messages on the internal pipeline bus, in causal order per track.
using PipelineEvent = std::variant<TrackEvent, PlateUpdate, AxleUpdate, TollTransaction>;

Json event_to_json(const PipelineEvent& event);

/// What the pipeline saw of one matched track in one frame.
struct TrackObservation {
  std::uint64_t track_id = 0;
  TrackStatus status = TrackStatus::Tentative;
  BoundingBox box;
  double confidence = 0.0;
  std::vector<Detection> plates;
  std::vector<Detection> wheels;
  friend bool operator==(const TrackObservation&, const TrackObservation&) = default;
};

struct FrameReport {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<PipelineEvent> events;
  std::vector<TollTransaction> transactions;
  std::vector<TrackObservation> observations;
  /// Per input detection: the matched track (vehicles) or owning track
  /// (plates, wheels); nullopt when unassigned.
  std::vector<std::optional<std::uint64_t>> detection_owner;
};

using WallClock = std::function<std::int64_t()>;

/// Milliseconds since the Unix epoch.
std::int64_t system_clock_ms();

/// optimal_batch_size, halved (floor, never below min_batch_size) once the
/// load exceeds the threshold.
int adjust_batch_size(double current_load, const PipelineConfig& cfg) noexcept;

/// Builds the billing record for an Exited track. Throws StateError otherwise.
TollTransaction finalize_transaction(const Track& track, const PlateConsensus& consensus, const AxleVerdict& verdict,
                                     const AppConfig& cfg, std::string transaction_id, std::int64_t created_at);

std::string make_transaction_id(std::string_view stream_id, std::uint64_t track_id);

/// Frame-ordered core: tracker, per-track plate fusion and axle counting,
/// transaction finalization and stale-record eviction. Not thread-safe; one
/// stage thread owns it.
class TollPipeline {
 public:
  explicit TollPipeline(AppConfig cfg, WallClock clock = system_clock_ms);

  /// Throws StreamOrderError on a gap or reorder relative to the last frame.
  FrameReport process_frame(const FrameDetections& frame);

  /// Validates the whole batch before touching state, then processes frame by
  /// frame. Same output as calling process_frame on each.
  std::vector<FrameReport> process_frame_batch(std::span<const FrameDetections> frames);
  void process_frame_batch(std::span<const FrameDetections> frames, const std::function<void(FrameReport&&)>& sink);

  void mark_persisted(const std::string& transaction_id);

  /// Evicts Exited tracks older than stale_ttl_ms whose transaction (if any)
  /// is persisted. Returns the number evicted.
  std::size_t manage_memory(std::int64_t now_ms);

  const Tracker& tracker() const noexcept { return tracker_; }
  const AppConfig& config() const noexcept { return cfg_; }
  const PlateConsensus* consensus_for(std::uint64_t track_id) const;
  std::optional<AxleVerdict> verdict_for(std::uint64_t track_id) const;
  std::size_t resident_records() const noexcept { return state_.size(); }
  std::size_t pending_persistence() const;
  std::optional<std::int64_t> last_frame_index() const noexcept { return last_frame_; }

 private:
  struct TrackState {
    PlateConsensus consensus;
    std::optional<AxleVerdict> verdict;
    std::optional<std::string> transaction_id;
    bool persisted = false;
  };

  void check_order(std::optional<std::int64_t> last, std::optional<std::int64_t> last_ts,
                   const FrameDetections& frame) const;

  AppConfig cfg_;
  WallClock clock_;
  Tracker tracker_;
  std::map<std::uint64_t, TrackState> state_;
  std::map<std::string, std::uint64_t> txn_to_track_;
  std::optional<std::int64_t> last_frame_;
  std::optional<std::int64_t> last_timestamp_;
};

}  // namespace tollplaza
