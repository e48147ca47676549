#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tollplaza/axle_counter.hpp"
#include "tollplaza/geometry.hpp"

namespace tollplaza {

enum class TrackStatus { Tentative, Active, Occluded, Exited };

std::string_view to_string(TrackStatus status);

/// Tentative->Active, Tentative->Exited, Active->Occluded, Occluded->Active,
/// Active->Exited, Occluded->Exited. Nothing leaves Exited.
bool is_legal_transition(TrackStatus from, TrackStatus to) noexcept;

struct Velocity {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Plate reads seen for a track in one frame.
struct PlateReadBatch {
  std::int64_t frame_index = 0;
  std::vector<RawPlateRead> reads;
  friend bool operator==(const PlateReadBatch&, const PlateReadBatch&) = default;
};

struct Track {
  std::uint64_t track_id = 0;
  TrackStatus status = TrackStatus::Tentative;
  BoundingBox last_box;
  Velocity velocity;  ///< pixels per frame
  double last_confidence = 0.0;
  std::int64_t entry_timestamp = 0;
  std::optional<std::int64_t> exit_timestamp;
  int frames_since_seen = 0;
  int hit_count = 0;
  bool activated = false;  ///< reached Active at least once
  std::int64_t last_matched_frame = 0;
  std::vector<PlateReadBatch> plate_history;
  std::vector<AxleEstimate> axle_history;

  friend bool operator==(const Track&, const Track&) = default;
};

struct TrackerConfig {
  double iou_match_threshold = 0.30;
  int activation_hits = 3;
  int occlusion_patience_frames = 15;
  int tentative_patience_frames = 5;
  double velocity_smoothing = 0.5;
  double duplicate_iou = 0.9;  ///< same-frame vehicle boxes above this collapse to one

  void validate() const;  // throws ValidationError
};

enum class TrackEventType { Created, Activated, Occluded, Reacquired, Exited };

std::string_view to_string(TrackEventType type);

struct TrackEvent {
  TrackEventType type = TrackEventType::Created;
  std::uint64_t track_id = 0;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  friend bool operator==(const TrackEvent&, const TrackEvent&) = default;
};

/// Box expected this frame: last box shifted by velocity * (frames_since_seen + 1).
/// Throws StateError for an Exited track.
BoundingBox predict(const Track& track);

struct MatchResult {
  std::vector<std::pair<std::uint64_t, std::size_t>> pairs;  ///< (track_id, detection index)
  std::vector<std::uint64_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// Greedy one-to-one assignment from an IoU matrix (row-major, rows = tracks).
/// Pairs are taken in descending IoU; ties go to the lower track id, then the
/// lower detection index. Pairs below `threshold` are never taken.
MatchResult greedy_assign(std::span<const double> iou_matrix, std::span<const std::uint64_t> track_ids,
                          std::size_t detection_count, double threshold);

MatchResult match_detections(std::span<const Track> tracks, std::span<const Detection> vehicle_detections,
                             const TrackerConfig& cfg);

/// Drops the lower-confidence member of every same-frame pair with IoU above
/// `threshold`. Keeps input order for the survivors.
std::vector<Detection> suppress_duplicates(std::vector<Detection> detections, double threshold);

/// Plates and wheels owned by one vehicle in one frame.
struct Attachment {
  std::vector<Detection> plates;
  std::vector<Detection> wheels;
};

/// Vehicle owning a plate or wheel detection under the rule below; nullopt for
/// other classes or when no vehicle contains it.
std::optional<std::uint64_t> attachment_owner(std::span<const std::pair<std::uint64_t, BoundingBox>> vehicles,
                                              const Detection& det, double slack);

/// Routes plate and wheel detections of `frame` to the vehicle box that
/// contains them (within slack) with the highest containment ratio; lower
/// track id wins ties. Detections owned by no vehicle are dropped.
std::map<std::uint64_t, Attachment> assign_attachments(
    std::span<const std::pair<std::uint64_t, BoundingBox>> vehicles, const FrameDetections& frame, double slack);

/// Single-writer track state machine, fed in frame order.
class Tracker {
 public:
  struct Update {
    std::vector<TrackEvent> events;
    /// (track_id, box) for every track matched this frame, ascending id.
    std::vector<std::pair<std::uint64_t, BoundingBox>> matched;
  };

  explicit Tracker(TrackerConfig cfg = {});

  /// Throws StreamOrderError unless frame_index exceeds the last one processed.
  Update update(const FrameDetections& frame);

  /// Ascending track id.
  const std::vector<Track>& tracks() const noexcept { return tracks_; }
  const Track* find(std::uint64_t track_id) const;
  std::size_t live_count() const noexcept;
  std::optional<std::int64_t> last_frame_index() const noexcept { return last_frame_; }
  const TrackerConfig& config() const noexcept { return cfg_; }

  /// Evidence for a live track. Throws StateError for Exited or unknown ids.
  void append_plate_batch(std::uint64_t track_id, PlateReadBatch batch);
  void append_axle_estimate(std::uint64_t track_id, AxleEstimate estimate);

  /// Removes an Exited track. Returns false for live or unknown ids.
  bool evict(std::uint64_t track_id);

 private:
  Track* find_mutable(std::uint64_t track_id);
  Track& live_track(std::uint64_t track_id);

  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 1;
  std::optional<std::int64_t> last_frame_;
};

}  // namespace tollplaza
