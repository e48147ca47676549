#include "tollplaza/tracker.hpp"

#include <algorithm>
#include <numeric>

#include "tollplaza/errors.hpp"
#include "tollplaza/kernels.hpp"

namespace tollplaza {

std::string_view to_string(TrackStatus status) {
  switch (status) {
    case TrackStatus::Tentative: return "Tentative";
    case TrackStatus::Active: return "Active";
    case TrackStatus::Occluded: return "Occluded";
    case TrackStatus::Exited: return "Exited";
  }
  return "Exited";
}

std::string_view to_string(TrackEventType type) {
  switch (type) {
    case TrackEventType::Created: return "Created";
    case TrackEventType::Activated: return "Activated";
    case TrackEventType::Occluded: return "Occluded";
    case TrackEventType::Reacquired: return "Reacquired";
    case TrackEventType::Exited: return "Exited";
  }
  return "Exited";
}

bool is_legal_transition(TrackStatus from, TrackStatus to) noexcept {
  using S = TrackStatus;
  switch (from) {
    case S::Tentative: return to == S::Active || to == S::Exited;
    case S::Active: return to == S::Occluded || to == S::Exited;
    case S::Occluded: return to == S::Active || to == S::Exited;
    case S::Exited: return false;
  }
  return false;
}

void TrackerConfig::validate() const {
  if (!(iou_match_threshold > 0.0 && iou_match_threshold <= 1.0)) {
    throw ValidationError("tracker.iou_match_threshold must be in (0,1]");
  }
  if (activation_hits < 1) throw ValidationError("tracker.activation_hits must be >= 1");
  if (occlusion_patience_frames < 1) throw ValidationError("tracker.occlusion_patience_frames must be >= 1");
  if (tentative_patience_frames < 1) throw ValidationError("tracker.tentative_patience_frames must be >= 1");
  if (!(velocity_smoothing >= 0.0 && velocity_smoothing <= 1.0)) {
    throw ValidationError("tracker.velocity_smoothing must be in [0,1]");
  }
  if (!(duplicate_iou > 0.0 && duplicate_iou <= 1.0)) throw ValidationError("tracker.duplicate_iou must be in (0,1]");
}

BoundingBox predict(const Track& track) {
  if (track.status == TrackStatus::Exited) {
    throw StateError("predict: track " + std::to_string(track.track_id) + " has exited");
  }
  const double steps = static_cast<double>(track.frames_since_seen + 1);
  return track.last_box.translated(track.velocity.dx * steps, track.velocity.dy * steps);
}

MatchResult greedy_assign(std::span<const double> iou_matrix, std::span<const std::uint64_t> track_ids,
                          std::size_t detection_count, double threshold) {
  struct Candidate {
    double iou;
    std::uint64_t track_id;
    std::size_t row;
    std::size_t col;
  };
  std::vector<Candidate> candidates;
  for (std::size_t r = 0; r < track_ids.size(); ++r) {
    for (std::size_t c = 0; c < detection_count; ++c) {
      const double v = iou_matrix[r * detection_count + c];
      if (v >= threshold && v > 0.0) candidates.push_back({v, track_ids[r], r, c});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.col < b.col;
  });

  std::vector<bool> row_used(track_ids.size(), false);
  std::vector<bool> col_used(detection_count, false);
  MatchResult result;
  for (const auto& cand : candidates) {
    if (row_used[cand.row] || col_used[cand.col]) continue;
    row_used[cand.row] = true;
    col_used[cand.col] = true;
    result.pairs.emplace_back(cand.track_id, cand.col);
  }
  for (std::size_t r = 0; r < track_ids.size(); ++r) {
    if (!row_used[r]) result.unmatched_tracks.push_back(track_ids[r]);
  }
  for (std::size_t c = 0; c < detection_count; ++c) {
    if (!col_used[c]) result.unmatched_detections.push_back(c);
  }
  return result;
}

MatchResult match_detections(std::span<const Track> tracks, std::span<const Detection> vehicle_detections,
                             const TrackerConfig& cfg) {
  std::vector<BoundingBox> predicted;
  std::vector<std::uint64_t> ids;
  predicted.reserve(tracks.size());
  for (const auto& t : tracks) {
    predicted.push_back(predict(t));
    ids.push_back(t.track_id);
  }
  std::vector<BoundingBox> boxes;
  boxes.reserve(vehicle_detections.size());
  for (const auto& d : vehicle_detections) boxes.push_back(d.box);
  const auto matrix = kernels::iou_matrix(predicted, boxes);
  return greedy_assign(matrix, ids, boxes.size(), cfg.iou_match_threshold);
}

std::vector<Detection> suppress_duplicates(std::vector<Detection> detections, double threshold) {
  std::vector<bool> dropped(detections.size(), false);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = i + 1; j < detections.size(); ++j) {
      if (dropped[j]) continue;
      if (iou(detections[i].box, detections[j].box) > threshold) {
        // The earlier detection survives an exact confidence tie.
        if (detections[j].confidence > detections[i].confidence) {
          dropped[i] = true;
          break;
        }
        dropped[j] = true;
      }
    }
  }
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!dropped[i]) kept.push_back(std::move(detections[i]));
  }
  return kept;
}

std::optional<std::uint64_t> attachment_owner(std::span<const std::pair<std::uint64_t, BoundingBox>> vehicles,
                                              const Detection& det, double slack) {
  if (det.cls != DetectionClass::LicensePlate && det.cls != DetectionClass::Wheel) return std::nullopt;
  std::optional<std::uint64_t> owner;
  double best_ratio = -1.0;
  for (const auto& [id, vbox] : vehicles) {
    if (!contains(vbox, det.box, slack)) continue;
    const double ratio = containment_ratio(vbox, det.box);
    if (ratio > best_ratio || (ratio == best_ratio && owner && id < *owner)) {
      best_ratio = ratio;
      owner = id;
    }
  }
  return owner;
}

std::map<std::uint64_t, Attachment> assign_attachments(
    std::span<const std::pair<std::uint64_t, BoundingBox>> vehicles, const FrameDetections& frame, double slack) {
  std::map<std::uint64_t, Attachment> out;
  for (const auto& det : frame.detections) {
    const auto owner = attachment_owner(vehicles, det, slack);
    if (!owner) continue;
    auto& slot = out[*owner];
    (det.cls == DetectionClass::LicensePlate ? slot.plates : slot.wheels).push_back(det);
  }
  return out;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const Track* Tracker::find(std::uint64_t track_id) const {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), track_id,
                             [](const Track& t, std::uint64_t id) { return t.track_id < id; });
  return (it != tracks_.end() && it->track_id == track_id) ? &*it : nullptr;
}

Track* Tracker::find_mutable(std::uint64_t track_id) { return const_cast<Track*>(find(track_id)); }

Track& Tracker::live_track(std::uint64_t track_id) {
  Track* t = find_mutable(track_id);
  if (!t) throw StateError("unknown track " + std::to_string(track_id));
  if (t->status == TrackStatus::Exited) {
    throw StateError("track " + std::to_string(track_id) + " has exited and is immutable");
  }
  return *t;
}

std::size_t Tracker::live_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      tracks_.begin(), tracks_.end(), [](const Track& t) { return t.status != TrackStatus::Exited; }));
}

void Tracker::append_plate_batch(std::uint64_t track_id, PlateReadBatch batch) {
  live_track(track_id).plate_history.push_back(std::move(batch));
}

void Tracker::append_axle_estimate(std::uint64_t track_id, AxleEstimate estimate) {
  live_track(track_id).axle_history.push_back(std::move(estimate));
}

bool Tracker::evict(std::uint64_t track_id) {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), track_id,
                             [](const Track& t, std::uint64_t id) { return t.track_id < id; });
  if (it == tracks_.end() || it->track_id != track_id || it->status != TrackStatus::Exited) return false;
  tracks_.erase(it);
  return true;
}

Tracker::Update Tracker::update(const FrameDetections& frame) {
  if (last_frame_ && frame.frame_index <= *last_frame_) {
    throw StreamOrderError("tracker: frame " + std::to_string(frame.frame_index) +
                           " does not follow frame " + std::to_string(*last_frame_));
  }
  last_frame_ = frame.frame_index;

  std::vector<Detection> vehicles;
  for (const auto& d : frame.detections) {
    if (d.cls == DetectionClass::Vehicle) vehicles.push_back(d);
  }
  vehicles = suppress_duplicates(std::move(vehicles), cfg_.duplicate_iou);

  std::vector<BoundingBox> predicted;
  std::vector<std::uint64_t> live_ids;
  for (const auto& t : tracks_) {
    if (t.status == TrackStatus::Exited) continue;
    predicted.push_back(predict(t));
    live_ids.push_back(t.track_id);
  }
  std::vector<BoundingBox> boxes;
  boxes.reserve(vehicles.size());
  for (const auto& d : vehicles) boxes.push_back(d.box);
  const MatchResult match =
      greedy_assign(kernels::iou_matrix(predicted, boxes), live_ids, boxes.size(), cfg_.iou_match_threshold);

  std::map<std::uint64_t, std::size_t> assigned;
  for (const auto& [id, det] : match.pairs) assigned.emplace(id, det);

  Update out;
  auto emit = [&](TrackEventType type, std::uint64_t id) {
    out.events.push_back({type, id, frame.frame_index, frame.timestamp_ms});
  };

  for (auto& track : tracks_) {
    if (track.status == TrackStatus::Exited) continue;
    auto hit = assigned.find(track.track_id);
    if (hit != assigned.end()) {
      const Detection& det = vehicles[hit->second];
      const auto [old_cx, old_cy] = box_center(track.last_box);
      const auto [new_cx, new_cy] = box_center(det.box);
      const double steps = static_cast<double>(track.frames_since_seen + 1);
      const Velocity measured{(new_cx - old_cx) / steps, (new_cy - old_cy) / steps};
      if (track.hit_count <= 1) {
        track.velocity = measured;
      } else {
        const double a = cfg_.velocity_smoothing;
        track.velocity = {a * measured.dx + (1.0 - a) * track.velocity.dx,
                          a * measured.dy + (1.0 - a) * track.velocity.dy};
      }
      track.last_box = det.box;
      track.last_confidence = det.confidence;
      track.frames_since_seen = 0;
      track.hit_count += 1;
      track.last_matched_frame = frame.frame_index;
      if (track.status == TrackStatus::Tentative && track.hit_count >= cfg_.activation_hits) {
        track.status = TrackStatus::Active;
        track.activated = true;
        emit(TrackEventType::Activated, track.track_id);
      } else if (track.status == TrackStatus::Occluded) {
        track.status = TrackStatus::Active;
        emit(TrackEventType::Reacquired, track.track_id);
      }
      out.matched.emplace_back(track.track_id, track.last_box);
      continue;
    }

    track.frames_since_seen += 1;
    bool exit = false;
    switch (track.status) {
      case TrackStatus::Tentative:
        exit = track.frames_since_seen > cfg_.tentative_patience_frames;
        break;
      case TrackStatus::Active:
        track.status = TrackStatus::Occluded;
        emit(TrackEventType::Occluded, track.track_id);
        exit = track.frames_since_seen > cfg_.occlusion_patience_frames;
        break;
      case TrackStatus::Occluded:
        exit = track.frames_since_seen > cfg_.occlusion_patience_frames;
        break;
      case TrackStatus::Exited:
        break;
    }
    if (exit) {
      track.status = TrackStatus::Exited;
      track.exit_timestamp = frame.timestamp_ms;
      emit(TrackEventType::Exited, track.track_id);
    }
  }

  for (std::size_t idx : match.unmatched_detections) {
    const Detection& det = vehicles[idx];
    Track t;
    t.track_id = next_id_++;
    t.last_box = det.box;
    t.last_confidence = det.confidence;
    t.entry_timestamp = frame.timestamp_ms;
    t.hit_count = 1;
    t.last_matched_frame = frame.frame_index;
    emit(TrackEventType::Created, t.track_id);
    if (t.hit_count >= cfg_.activation_hits) {
      t.status = TrackStatus::Active;
      t.activated = true;
      emit(TrackEventType::Activated, t.track_id);
    }
    out.matched.emplace_back(t.track_id, t.last_box);
    tracks_.push_back(std::move(t));
  }
  return out;
}

}  // namespace tollplaza
