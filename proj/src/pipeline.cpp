#include "tollplaza/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "tollplaza/errors.hpp"

namespace tollplaza {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Json event_to_json(const PipelineEvent& event) {
  return std::visit(
      Overloaded{
          [](const TrackEvent& e) {
            return Json{{"kind", "track"},
                        {"event_type", std::string(to_string(e.type))},
                        {"track_id", e.track_id},
                        {"frame_index", e.frame_index},
                        {"timestamp_ms", e.timestamp_ms}};
          },
          [](const PlateUpdate& e) {
            return Json{{"kind", "plate"},
                        {"track_id", e.track_id},
                        {"frame_index", e.frame_index},
                        {"text", e.text},
                        {"fused_confidence", round6(e.fused_confidence)},
                        {"status", std::string(to_string(e.status))}};
          },
          [](const AxleUpdate& e) {
            return Json{{"kind", "axle"},
                        {"track_id", e.track_id},
                        {"frame_index", e.frame_index},
                        {"validated_count", e.validated_count},
                        {"temporal_confidence", round6(e.temporal_confidence)}};
          },
          [](const TollTransaction& t) {
            Json j = transaction_to_json(t);
            j["kind"] = "transaction";
            return j;
          },
      },
      event);
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int adjust_batch_size(double current_load, const PipelineConfig& cfg) noexcept {
  if (current_load > cfg.load_threshold) return std::max(cfg.min_batch_size, cfg.optimal_batch_size / 2);
  return cfg.optimal_batch_size;
}

std::string make_transaction_id(std::string_view stream_id, std::uint64_t track_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(track_id));
  return std::string(stream_id) + "-" + buf;
}

TollTransaction finalize_transaction(const Track& track, const PlateConsensus& consensus, const AxleVerdict& verdict,
                                     const AppConfig& cfg, std::string transaction_id, std::int64_t created_at) {
  if (track.status != TrackStatus::Exited || !track.exit_timestamp) {
    throw StateError("finalize_transaction: track " + std::to_string(track.track_id) + " has not exited");
  }
  TollTransaction t;
  t.transaction_id = std::move(transaction_id);
  t.track_id = track.track_id;
  t.plate_text = consensus.text;
  t.fused_confidence = round6(consensus.fused_confidence);
  t.plate_status = consensus.status;
  t.axle_count = verdict.validated_count;
  t.axle_confidence = round6(verdict.temporal_confidence);
  t.vehicle_class = classify_vehicle(verdict, cfg.class_table);
  t.toll_amount = cfg.pipeline.rate_table.at(t.vehicle_class);
  t.entry_timestamp = track.entry_timestamp;
  t.exit_timestamp = *track.exit_timestamp;
  // Unlocked plates and unclassifiable vehicles both go to the operator queue.
  t.review_required = consensus.status != PlateStatus::Locked || t.vehicle_class == kUnclassified;
  t.created_at = created_at;
  return t;
}

TollPipeline::TollPipeline(AppConfig cfg, WallClock clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)), tracker_(cfg_.tracker) {
  cfg_.validate();
}

void TollPipeline::check_order(std::optional<std::int64_t> last, std::optional<std::int64_t> last_ts,
                               const FrameDetections& frame) const {
  if (last && frame.frame_index != *last + 1) {
    throw StreamOrderError("pipeline: expected frame " + std::to_string(*last + 1) + ", got " +
                           std::to_string(frame.frame_index));
  }
  if (last_ts && frame.timestamp_ms < *last_ts) {
    throw StreamOrderError("pipeline: timestamp went backwards at frame " + std::to_string(frame.frame_index));
  }
}

FrameReport TollPipeline::process_frame(const FrameDetections& frame) {
  check_order(last_frame_, last_timestamp_, frame);

  Tracker::Update update = tracker_.update(frame);
  last_frame_ = frame.frame_index;
  last_timestamp_ = frame.timestamp_ms;

  FrameReport report;
  report.frame_index = frame.frame_index;
  report.timestamp_ms = frame.timestamp_ms;
  for (const auto& e : update.events) report.events.emplace_back(e);

  const auto attachments = assign_attachments(update.matched, frame, cfg_.pipeline.containment_slack);

  report.detection_owner.reserve(frame.detections.size());
  std::vector<bool> claimed(update.matched.size(), false);
  for (const auto& det : frame.detections) {
    std::optional<std::uint64_t> owner;
    if (det.cls == DetectionClass::Vehicle) {
      for (std::size_t k = 0; k < update.matched.size(); ++k) {
        if (!claimed[k] && update.matched[k].second == det.box) {
          claimed[k] = true;
          owner = update.matched[k].first;
          break;
        }
      }
    } else {
      owner = attachment_owner(update.matched, det, cfg_.pipeline.containment_slack);
    }
    report.detection_owner.push_back(owner);
  }

  std::vector<EvidenceWork> work;
  work.reserve(update.matched.size());
  for (const auto& [id, box] : update.matched) {
    auto [it, inserted] = state_.try_emplace(id);
    if (inserted) it->second.consensus.track_id = id;
    const Track* track = tracker_.find(id);
    EvidenceWork w;
    w.track_id = id;
    w.frame_index = frame.frame_index;
    w.vehicle_box = box;
    w.consensus = &it->second.consensus;
    w.axle_history = track->axle_history;
    auto a = attachments.find(id);
    w.attachment = a == attachments.end() ? nullptr : &a->second;
    work.push_back(w);

    TrackObservation obs;
    obs.track_id = id;
    obs.status = track->status;
    obs.box = box;
    obs.confidence = track->last_confidence;
    if (w.attachment) {
      obs.plates = w.attachment->plates;
      obs.wheels = w.attachment->wheels;
    }
    report.observations.push_back(std::move(obs));
  }

  const EvidenceSettings settings{cfg_.plate_formats, cfg_.ensemble, cfg_.axles};
  auto results = kernels::process_evidence(work, settings);

  for (auto& r : results) {
    auto& st = state_.at(r.track_id);
    if (r.plate_batch) tracker_.append_plate_batch(r.track_id, std::move(*r.plate_batch));
    tracker_.append_axle_estimate(r.track_id, r.estimate);
    if (r.consensus_changed) {
      report.events.emplace_back(PlateUpdate{r.track_id, frame.frame_index, r.consensus.text,
                                             r.consensus.fused_confidence, r.consensus.status});
    }
    st.consensus = std::move(r.consensus);
    const bool verdict_changed = !st.verdict || st.verdict->validated_count != r.verdict.validated_count ||
                                 st.verdict->temporal_confidence != r.verdict.temporal_confidence;
    if (verdict_changed) {
      report.events.emplace_back(
          AxleUpdate{r.track_id, frame.frame_index, r.verdict.validated_count, r.verdict.temporal_confidence});
    }
    st.verdict = r.verdict;
  }

  for (const auto& e : update.events) {
    if (e.type != TrackEventType::Exited) continue;
    const Track* track = tracker_.find(e.track_id);
    if (!track->activated) continue;  // tentative flicker: never billed
    auto& st = state_[e.track_id];
    if (st.transaction_id) continue;
    // billing verdict votes over the whole visible span; the rolling window
    // only drives the live AxleUpdated stream
    AxleVerdict verdict{e.track_id, 0, 0.0, 0};
    if (!track->axle_history.empty()) {
      verdict = validate_temporal(track->axle_history, static_cast<int>(track->axle_history.size()));
      verdict.track_id = e.track_id;
    }
    auto txn = finalize_transaction(*track, st.consensus, verdict, cfg_,
                                    make_transaction_id(cfg_.pipeline.stream_id, e.track_id), clock_());
    st.transaction_id = txn.transaction_id;
    txn_to_track_[txn.transaction_id] = e.track_id;
    report.events.emplace_back(txn);
    report.transactions.push_back(std::move(txn));
  }
  return report;
}

std::vector<FrameReport> TollPipeline::process_frame_batch(std::span<const FrameDetections> frames) {
  std::vector<FrameReport> out;
  out.reserve(frames.size());
  process_frame_batch(frames, [&out](FrameReport&& r) { out.push_back(std::move(r)); });
  return out;
}

void TollPipeline::process_frame_batch(std::span<const FrameDetections> frames,
                                       const std::function<void(FrameReport&&)>& sink) {
  auto last = last_frame_;
  auto last_ts = last_timestamp_;
  for (const auto& f : frames) {
    check_order(last, last_ts, f);
    last = f.frame_index;
    last_ts = f.timestamp_ms;
  }
  for (const auto& f : frames) sink(process_frame(f));
}

void TollPipeline::mark_persisted(const std::string& transaction_id) {
  auto it = txn_to_track_.find(transaction_id);
  if (it == txn_to_track_.end()) return;
  auto st = state_.find(it->second);
  if (st != state_.end()) st->second.persisted = true;
}

std::size_t TollPipeline::pending_persistence() const {
  return static_cast<std::size_t>(std::count_if(state_.begin(), state_.end(), [](const auto& kv) {
    return kv.second.transaction_id && !kv.second.persisted;
  }));
}

std::size_t TollPipeline::manage_memory(std::int64_t now_ms) {
  std::vector<std::uint64_t> victims;
  for (const auto& t : tracker_.tracks()) {
    if (t.status != TrackStatus::Exited || !t.exit_timestamp) continue;
    if (now_ms - *t.exit_timestamp <= cfg_.pipeline.stale_ttl_ms) continue;
    auto st = state_.find(t.track_id);
    if (st != state_.end() && st->second.transaction_id && !st->second.persisted) continue;
    victims.push_back(t.track_id);
  }
  for (auto id : victims) {
    tracker_.evict(id);
    auto st = state_.find(id);
    if (st != state_.end()) {
      if (st->second.transaction_id) txn_to_track_.erase(*st->second.transaction_id);
      state_.erase(st);
    }
  }
  return victims.size();
}

const PlateConsensus* TollPipeline::consensus_for(std::uint64_t track_id) const {
  auto it = state_.find(track_id);
  return it == state_.end() ? nullptr : &it->second.consensus;
}

std::optional<AxleVerdict> TollPipeline::verdict_for(std::uint64_t track_id) const {
  auto it = state_.find(track_id);
  return it == state_.end() ? std::nullopt : it->second.verdict;
}

}  // namespace tollplaza
