#include "tollplaza/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tollplaza/errors.hpp"

namespace tollplaza {

namespace {

std::size_t class_index(DetectionClass cls) { return static_cast<std::size_t>(cls); }

// Truth index taken by each prediction, or -1. Same rule as greedy_match.
std::vector<int> greedy_assignment(std::span<const BoundingBox> predictions, std::span<const double> confidences,
                                   std::span<const BoundingBox> truths, double iou_threshold) {
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
  std::vector<int> out(predictions.size(), -1);
  std::vector<bool> taken(truths.size(), false);
  for (std::size_t p : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (taken[t]) continue;
      const double v = iou(predictions[p], truths[t]);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(t);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      out[p] = best;
    }
  }
  return out;
}

std::optional<std::uint64_t> json_track_id(const Json& j) {
  if (!j.contains("track_id") || j.at("track_id").is_null()) return std::nullopt;
  return j.at("track_id").get<std::uint64_t>();
}

}  // namespace

OutputFrame make_output_frame(const FrameDetections& frame, const FrameReport& report) {
  OutputFrame out;
  out.frame_index = frame.frame_index;
  out.timestamp_ms = frame.timestamp_ms;
  out.detections.reserve(frame.detections.size());
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const auto& d = frame.detections[i];
    out.detections.push_back(
        {d.cls, d.confidence, d.box, i < report.detection_owner.size() ? report.detection_owner[i] : std::nullopt});
  }
  return out;
}

std::string output_header_line(const std::string& trace_id, const std::string& stream_id) {
  return Json{{"record", "header"}, {"trace_id", trace_id}, {"stream_id", stream_id}}.dump();
}

std::string output_frame_line(const OutputFrame& frame) {
  Json dets = Json::array();
  for (const auto& d : frame.detections) {
    dets.push_back({{"class", std::string(to_string(d.cls))},
                    {"confidence", round6(d.confidence)},
                    {"box", box_to_json(d.box)},
                    {"track_id", d.track_id ? Json(*d.track_id) : Json(nullptr)}});
  }
  return Json{{"record", "frame"},
              {"frame_index", frame.frame_index},
              {"timestamp_ms", frame.timestamp_ms},
              {"detections", dets}}
      .dump();
}

std::string output_transaction_line(const TollTransaction& txn) {
  Json j = transaction_to_json(txn);
  j["record"] = "transaction";
  return j.dump();
}

PipelineOutput parse_pipeline_output(std::istream& in) {
  PipelineOutput out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "header") {
        out.trace_id = j.at("trace_id").get<std::string>();
        out.stream_id = j.value("stream_id", "");
        header = true;
      } else if (kind == "frame") {
        OutputFrame f;
        f.frame_index = j.at("frame_index").get<std::int64_t>();
        f.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
        for (const auto& d : j.at("detections")) {
          const auto cls = detection_class_from_string(d.at("class").get<std::string>());
          if (!cls) throw FormatError("unknown class " + d.at("class").dump());
          f.detections.push_back({*cls, d.at("confidence").get<double>(), box_from_json(d.at("box")), json_track_id(d)});
        }
        out.frames.push_back(std::move(f));
      } else if (kind == "transaction") {
        out.transactions.push_back(transaction_from_json(j));
      } else {
        throw FormatError("unknown record kind '" + kind + "'");
      }
    } catch (const Json::exception& e) {
      throw FormatError("pipeline output line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("pipeline output line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw FormatError("pipeline output has no header record");
  return out;
}

PipelineOutput load_pipeline_output(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open pipeline output " + path.string());
  return parse_pipeline_output(in);
}

void save_pipeline_output(const std::filesystem::path& path, const PipelineOutput& output) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write pipeline output " + path.string());
  out << output_header_line(output.trace_id, output.stream_id) << '\n';
  for (const auto& f : output.frames) out << output_frame_line(f) << '\n';
  for (const auto& t : output.transactions) out << output_transaction_line(t) << '\n';
}

PipelineOutput replay_trace(std::span<const FrameDetections> frames, const AppConfig& cfg, WallClock clock,
                            std::string trace_id, std::span<const int> batch_schedule) {
  TollPipeline pipeline(cfg, std::move(clock));
  PipelineOutput out;
  out.trace_id = std::move(trace_id);
  out.stream_id = cfg.pipeline.stream_id;
  std::size_t pos = 0, step = 0;
  while (pos < frames.size()) {
    const int want = batch_schedule.empty() ? 1 : batch_schedule[step++ % batch_schedule.size()];
    const std::size_t n = std::min(frames.size() - pos, static_cast<std::size_t>(std::max(want, 1)));
    const auto batch = frames.subspan(pos, n);
    std::size_t k = 0;
    pipeline.process_frame_batch(batch, [&](FrameReport&& report) {
      out.frames.push_back(make_output_frame(batch[k++], report));
      for (auto& t : report.transactions) out.transactions.push_back(std::move(t));
    });
    pos += n;
  }
  return out;
}

PipelineOutput truth_as_output(const GroundTruth& truth) {
  PipelineOutput out;
  out.trace_id = truth.trace_id;
  out.stream_id = "truth";
  for (const auto& tf : truth.frames) {
    OutputFrame f;
    f.frame_index = tf.frame_index;
    for (const auto& o : tf.objects) f.detections.push_back({o.cls, 1.0, o.box, o.vehicle_id});
    out.frames.push_back(std::move(f));
  }
  for (const auto& v : truth.vehicles) {
    TollTransaction t;
    t.transaction_id = make_transaction_id(out.stream_id, v.vehicle_id);
    t.track_id = v.vehicle_id;
    t.plate_text = v.plate;
    t.fused_confidence = 1.0;
    t.plate_status = PlateStatus::Locked;
    t.axle_count = v.axles;
    t.axle_confidence = 1.0;
    t.entry_timestamp = v.entry_frame;
    t.exit_timestamp = v.exit_frame;
    out.transactions.push_back(std::move(t));
  }
  return out;
}

std::vector<bool> greedy_match(std::span<const BoundingBox> predictions, std::span<const double> confidences,
                               std::span<const BoundingBox> truths, double iou_threshold) {
  const auto a = greedy_assignment(predictions, confidences, truths, iou_threshold);
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] >= 0;
  return out;
}

std::vector<PrPoint> pr_curve(std::vector<RankedDetection> ranked, std::size_t positives) {
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedDetection& a, const RankedDetection& b) { return a.confidence > b.confidence; });
  std::vector<PrPoint> curve;
  std::size_t tp = 0, n = 0;
  for (std::size_t i = 0; i < ranked.size();) {
    const double conf = ranked[i].confidence;
    // a threshold admits every detection at that confidence at once
    for (; i < ranked.size() && ranked[i].confidence == conf; ++i) {
      ++n;
      if (ranked[i].true_positive) ++tp;
    }
    curve.push_back({conf, static_cast<double>(tp) / static_cast<double>(n),
                     positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0});
  }
  return curve;
}

double average_precision(std::span<const PrPoint> curve) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k].recall <= prev_recall) continue;
    double best = 0.0;
    for (std::size_t j = k; j < curve.size(); ++j) best = std::max(best, curve[j].precision);
    ap += (curve[k].recall - prev_recall) * best;
    prev_recall = curve[k].recall;
  }
  return ap;
}

EvalReport evaluate(const PipelineOutput& output, const GroundTruth& truth, const EvalOptions& options) {
  if (output.trace_id != truth.trace_id) {
    throw ValidationError("evaluate: output trace " + output.trace_id + " does not match truth trace " +
                          truth.trace_id);
  }
  EvalReport r;
  r.trace_id = truth.trace_id;
  r.iou_threshold = options.iou_threshold;

  std::map<std::int64_t, const TruthFrame*> truth_frames;
  std::map<std::int64_t, const OutputFrame*> out_frames;
  for (const auto& f : truth.frames) truth_frames[f.frame_index] = &f;
  for (const auto& f : output.frames) out_frames[f.frame_index] = &f;
  std::set<std::int64_t> indices;
  for (const auto& [k, _] : truth_frames) indices.insert(k);
  for (const auto& [k, _] : out_frames) indices.insert(k);

  std::array<std::vector<RankedDetection>, kClassCount> ranked;
  // (vehicle id -> per frame assigned track) and (track -> vehicle -> frames)
  std::map<std::uint64_t, std::vector<std::uint64_t>> vehicle_tracks;
  std::map<std::uint64_t, std::map<std::uint64_t, std::size_t>> track_votes;
  const TruthFrame empty_truth;
  const OutputFrame empty_output;

  for (std::int64_t fi : indices) {
    const auto* tf = truth_frames.count(fi) ? truth_frames[fi] : &empty_truth;
    const auto* of = out_frames.count(fi) ? out_frames[fi] : &empty_output;

    std::array<std::vector<std::size_t>, kClassCount> pred_idx, truth_idx;
    for (std::size_t i = 0; i < of->detections.size(); ++i) pred_idx[class_index(of->detections[i].cls)].push_back(i);
    for (std::size_t i = 0; i < tf->objects.size(); ++i) truth_idx[class_index(tf->objects[i].cls)].push_back(i);

    std::vector<bool> pred_matched(of->detections.size(), false);
    std::vector<bool> truth_matched(tf->objects.size(), false);
    std::vector<bool> pred_matched_conf(of->detections.size(), false);
    std::vector<bool> truth_matched_conf(tf->objects.size(), false);

    for (std::size_t c = 0; c < kClassCount; ++c) {
      std::vector<BoundingBox> pb, tb;
      std::vector<double> pc;
      for (auto i : pred_idx[c]) {
        pb.push_back(of->detections[i].box);
        pc.push_back(of->detections[i].confidence);
      }
      for (auto i : truth_idx[c]) tb.push_back(tf->objects[i].box);
      r.per_class[c].support += tb.size();
      r.per_class[c].predictions += pb.size();

      const auto assign = greedy_assignment(pb, pc, tb, options.iou_threshold);
      for (std::size_t k = 0; k < assign.size(); ++k) {
        const bool tp = assign[k] >= 0;
        ranked[c].push_back({pc[k], tp});
        if (!tp) continue;
        const auto pi = pred_idx[c][k];
        const auto ti = truth_idx[c][static_cast<std::size_t>(assign[k])];
        pred_matched[pi] = true;
        truth_matched[ti] = true;
        if (static_cast<DetectionClass>(c) == DetectionClass::Vehicle && of->detections[pi].track_id) {
          const auto vid = tf->objects[ti].vehicle_id;
          const auto tid = *of->detections[pi].track_id;
          vehicle_tracks[vid].push_back(tid);
          track_votes[tid][vid] += 1;
        }
      }

      // confusion matrix works on the confident subset only
      std::vector<BoundingBox> pbc;
      std::vector<double> pcc;
      std::vector<std::size_t> keep;
      for (std::size_t k = 0; k < pb.size(); ++k) {
        if (pc[k] >= options.confusion_confidence) {
          pbc.push_back(pb[k]);
          pcc.push_back(pc[k]);
          keep.push_back(pred_idx[c][k]);
        }
      }
      const auto assign_c = greedy_assignment(pbc, pcc, tb, options.iou_threshold);
      for (std::size_t k = 0; k < assign_c.size(); ++k) {
        if (assign_c[k] < 0) continue;
        pred_matched_conf[keep[k]] = true;
        truth_matched_conf[truth_idx[c][static_cast<std::size_t>(assign_c[k])]] = true;
        r.confusion[c][c] += 1;
      }
    }

    // cross-class confusions among the leftovers, highest IoU first
    std::vector<std::tuple<double, std::size_t, std::size_t>> cross;
    for (std::size_t p = 0; p < of->detections.size(); ++p) {
      if (pred_matched_conf[p] || of->detections[p].confidence < options.confusion_confidence) continue;
      for (std::size_t t = 0; t < tf->objects.size(); ++t) {
        if (truth_matched_conf[t]) continue;
        const double v = iou(of->detections[p].box, tf->objects[t].box);
        if (v >= options.iou_threshold) cross.emplace_back(v, p, t);
      }
    }
    std::stable_sort(cross.begin(), cross.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    for (const auto& [v, p, t] : cross) {
      if (pred_matched_conf[p] || truth_matched_conf[t]) continue;
      pred_matched_conf[p] = truth_matched_conf[t] = true;
      r.confusion[class_index(tf->objects[t].cls)][class_index(of->detections[p].cls)] += 1;
    }
    const std::size_t bg = class_index(DetectionClass::Background);
    for (std::size_t t = 0; t < tf->objects.size(); ++t) {
      if (!truth_matched_conf[t]) r.confusion[class_index(tf->objects[t].cls)][bg] += 1;
    }
    for (std::size_t p = 0; p < of->detections.size(); ++p) {
      if (!pred_matched_conf[p] && of->detections[p].confidence >= options.confusion_confidence) {
        r.confusion[bg][class_index(of->detections[p].cls)] += 1;
      }
    }
  }

  // per-class precision/recall/AP, pooled F1 sweep
  double ap_sum = 0.0;
  std::size_t ap_classes = 0;
  std::vector<RankedDetection> pooled;
  std::size_t pooled_positives = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    auto& m = r.per_class[c];
    m.true_positives = static_cast<std::size_t>(
        std::count_if(ranked[c].begin(), ranked[c].end(), [](const RankedDetection& d) { return d.true_positive; }));
    m.precision_undefined = m.predictions == 0;
    m.precision = m.predictions ? static_cast<double>(m.true_positives) / static_cast<double>(m.predictions) : 0.0;
    m.recall = m.support ? static_cast<double>(m.true_positives) / static_cast<double>(m.support) : 0.0;
    const auto curve = pr_curve(ranked[c], m.support);
    m.average_precision = average_precision(curve);
    if (m.support > 0) {
      ap_sum += m.average_precision;
      ++ap_classes;
    }
    pooled.insert(pooled.end(), ranked[c].begin(), ranked[c].end());
    pooled_positives += m.support;
  }
  r.map50 = ap_classes ? ap_sum / static_cast<double>(ap_classes) : 0.0;
  for (const auto& pt : pr_curve(std::move(pooled), pooled_positives)) {
    const double denom = pt.precision + pt.recall;
    const double f1 = denom > 0.0 ? 2.0 * pt.precision * pt.recall / denom : 0.0;
    if (f1 > r.best_f1) {
      r.best_f1 = f1;
      r.best_f1_threshold = pt.threshold;
    }
  }

  // identity metrics
  std::size_t single_track = 0;
  std::map<std::uint64_t, std::uint64_t> dominant_track;
  for (const auto& v : truth.vehicles) {
    auto it = vehicle_tracks.find(v.vehicle_id);
    if (it == vehicle_tracks.end()) continue;
    const auto& seq = it->second;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      if (seq[k] != seq[k - 1]) ++r.id_switches;
    }
    std::map<std::uint64_t, std::size_t> counts;
    for (auto t : seq) counts[t] += 1;
    if (counts.size() == 1) ++single_track;
    dominant_track[v.vehicle_id] =
        std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
            ->first;
  }
  std::size_t majority_frames = 0, matched_frames = 0;
  std::map<std::uint64_t, std::uint64_t> track_owner;
  for (const auto& [tid, votes] : track_votes) {
    const auto best =
        std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    track_owner[tid] = best->first;
    majority_frames += best->second;
    for (const auto& [vid, n] : votes) matched_frames += n;
  }
  r.track_purity = matched_frames ? static_cast<double>(majority_frames) / static_cast<double>(matched_frames) : 0.0;

  // billing metrics
  std::map<std::uint64_t, std::vector<const TollTransaction*>> billed;
  double locked_sum = 0.0;
  for (const auto& t : output.transactions) {
    if (t.plate_status == PlateStatus::Locked) {
      locked_sum += t.fused_confidence;
      ++r.locked_transactions;
    }
    auto owner = track_owner.find(t.track_id);
    if (owner == track_owner.end()) {
      ++r.unmatched_transactions;
      continue;
    }
    billed[owner->second].push_back(&t);
  }
  r.mean_locked_confidence = r.locked_transactions ? locked_sum / static_cast<double>(r.locked_transactions) : 0.0;

  r.vehicles = truth.vehicles.size();
  std::size_t plate_ok = 0, axle_ok = 0, locked_ok = 0, one_txn = 0, chars_ok = 0, chars_total = 0;
  for (const auto& v : truth.vehicles) {
    chars_total += v.plate.size();
    auto it = billed.find(v.vehicle_id);
    if (it == billed.end()) continue;
    const auto& txns = it->second;
    if (txns.size() == 1) ++one_txn;
    const TollTransaction* pick = txns.front();
    if (auto d = dominant_track.find(v.vehicle_id); d != dominant_track.end()) {
      for (const auto* t : txns) {
        if (t->track_id == d->second) pick = t;
      }
    }
    if (pick->plate_text == v.plate) ++plate_ok;
    if (pick->axle_count == v.axles) ++axle_ok;
    if (pick->plate_status == PlateStatus::Locked) ++locked_ok;
    for (std::size_t i = 0; i < std::min(v.plate.size(), pick->plate_text.size()); ++i) {
      if (v.plate[i] == pick->plate_text[i]) ++chars_ok;
    }
  }
  const auto frac = [&](std::size_t n) {
    return r.vehicles ? static_cast<double>(n) / static_cast<double>(r.vehicles) : 0.0;
  };
  r.plate_accuracy = frac(plate_ok);
  r.axle_accuracy = frac(axle_ok);
  r.first_pass_lock_rate = frac(locked_ok);
  r.single_track_fraction = frac(single_track);
  r.single_transaction_fraction = frac(one_txn);
  r.character_accuracy = chars_total ? static_cast<double>(chars_ok) / static_cast<double>(chars_total) : 0.0;
  return r;
}

Json report_to_json(const EvalReport& r) {
  Json classes = Json::object();
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const auto& m = r.per_class[c];
    classes[std::string(to_string(kAllDetectionClasses[c]))] = {
        {"support", m.support},
        {"predictions", m.predictions},
        {"true_positives", m.true_positives},
        {"precision", round6(m.precision)},
        {"precision_undefined", m.precision_undefined},
        {"recall", round6(m.recall)},
        {"average_precision", round6(m.average_precision)}};
  }
  Json labels = Json::array();
  for (auto c : kAllDetectionClasses) labels.push_back(std::string(to_string(c)));
  Json rows = Json::array();
  for (const auto& row : r.confusion) rows.push_back(Json(std::vector<std::size_t>(row.begin(), row.end())));
  return {{"trace_id", r.trace_id},
          {"iou_threshold", r.iou_threshold},
          {"detection",
           {{"per_class", classes},
            {"map50", round6(r.map50)},
            {"best_f1", round6(r.best_f1)},
            {"best_f1_threshold", round6(r.best_f1_threshold)},
            {"confusion", {{"labels", labels}, {"rows_true_columns_predicted", rows}}}}},
          {"plates",
           {{"vehicles", r.vehicles},
            {"per_plate_accuracy", round6(r.plate_accuracy)},
            {"per_character_accuracy", round6(r.character_accuracy)},
            {"mean_locked_confidence", round6(r.mean_locked_confidence)},
            {"locked_transactions", r.locked_transactions},
            {"first_pass_lock_rate", round6(r.first_pass_lock_rate)}}},
          {"axles", {{"per_vehicle_accuracy", round6(r.axle_accuracy)}}},
          {"tracking",
           {{"id_switches", r.id_switches},
            {"vehicles_with_exactly_one_track", round6(r.single_track_fraction)},
            {"track_purity", round6(r.track_purity)},
            {"vehicles_with_exactly_one_transaction", round6(r.single_transaction_fraction)},
            {"unmatched_transactions", r.unmatched_transactions}}}};
}

}  // namespace tollplaza
