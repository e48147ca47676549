#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollplaza/geometry.hpp"
#include "tollplaza/pipeline.hpp"
#include "tollplaza/traffic_sim.hpp"
#include "tollplaza/transaction.hpp"

namespace tollplaza {

// ---- pipeline output file -------------------------------------------------
//
// Line-delimited: one header, then per-frame records and transaction records
// in emission order.
//   {"record":"header","trace_id":...,"stream_id":...}
//   {"record":"frame","frame_index":..,"timestamp_ms":..,"detections":[{class,confidence,box,track_id|null}]}
//   {"record":"transaction", <TollTransaction fields>}

struct OutputDetection {
  DetectionClass cls = DetectionClass::Background;
  double confidence = 0.0;
  BoundingBox box;
  std::optional<std::uint64_t> track_id;
  friend bool operator==(const OutputDetection&, const OutputDetection&) = default;
};

struct OutputFrame {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<OutputDetection> detections;
  friend bool operator==(const OutputFrame&, const OutputFrame&) = default;
};

struct PipelineOutput {
  std::string trace_id;
  std::string stream_id;
  std::vector<OutputFrame> frames;
  std::vector<TollTransaction> transactions;
};

OutputFrame make_output_frame(const FrameDetections& frame, const FrameReport& report);

std::string output_header_line(const std::string& trace_id, const std::string& stream_id);
std::string output_frame_line(const OutputFrame& frame);
std::string output_transaction_line(const TollTransaction& txn);

PipelineOutput parse_pipeline_output(std::istream& in);
PipelineOutput load_pipeline_output(const std::filesystem::path& path);
void save_pipeline_output(const std::filesystem::path& path, const PipelineOutput& output);

/// Offline replay: feeds `frames` through a fresh pipeline in batches whose
/// sizes cycle through `batch_schedule` (empty means one frame at a time).
PipelineOutput replay_trace(std::span<const FrameDetections> frames, const AppConfig& cfg, WallClock clock,
                            std::string trace_id, std::span<const int> batch_schedule = {});

/// Output a perfect system would produce for `truth`: every true box detected
/// with confidence 1 under track id = vehicle id, one Locked transaction per
/// vehicle carrying the true plate and axle count.
PipelineOutput truth_as_output(const GroundTruth& truth);

// ---- detection metrics ------------------------------------------------------

/// One scored detection after greedy matching, for rank sweeps.
struct RankedDetection {
  double confidence = 0.0;
  bool true_positive = false;
};

/// Greedy matching in one frame for one class: predictions in descending
/// confidence (stable on index) each take the unmatched truth with the highest
/// IoU >= threshold (lower truth index on ties). Returns TP flags in
/// prediction order.
std::vector<bool> greedy_match(std::span<const BoundingBox> predictions, std::span<const double> confidences,
                               std::span<const BoundingBox> truths, double iou_threshold);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision/recall after each group of equal confidences, descending.
std::vector<PrPoint> pr_curve(std::vector<RankedDetection> ranked, std::size_t positives);

/// All-point interpolated area: sum over recall increments of the maximum
/// precision at that recall or beyond. 0 when there are no positives.
double average_precision(std::span<const PrPoint> curve);

struct ClassMetrics {
  std::size_t support = 0;  ///< truth objects
  std::size_t predictions = 0;
  std::size_t true_positives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double average_precision = 0.0;
  bool precision_undefined = false;  ///< no predictions; precision reported as 0
};

inline constexpr std::size_t kClassCount = std::size(kAllDetectionClasses);

/// Rows: true class (Background row = predictions matching no truth).
/// Columns: predicted class (Background column = truths left undetected).
using ConfusionMatrix = std::array<std::array<std::size_t, kClassCount>, kClassCount>;

struct EvalOptions {
  double iou_threshold = 0.5;
  double confusion_confidence = 0.25;  ///< predictions below this are ignored by the confusion matrix
};

struct EvalReport {
  std::string trace_id;
  double iou_threshold = 0.5;

  std::array<ClassMetrics, kClassCount> per_class{};
  double map50 = 0.0;  ///< mean AP over classes with support
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  ConfusionMatrix confusion{};

  std::size_t vehicles = 0;
  double plate_accuracy = 0.0;      ///< vehicles whose billed plate equals the truth
  double character_accuracy = 0.0;  ///< position-wise over true plate characters
  double mean_locked_confidence = 0.0;
  std::size_t locked_transactions = 0;
  double first_pass_lock_rate = 0.0;  ///< vehicles billed with a Locked plate
  double axle_accuracy = 0.0;

  std::size_t id_switches = 0;
  double single_track_fraction = 0.0;  ///< vehicles covered by exactly one track id
  double track_purity = 0.0;           ///< frame-weighted majority share per track
  double single_transaction_fraction = 0.0;
  std::size_t unmatched_transactions = 0;  ///< billed tracks tied to no vehicle
};

/// Throws ValidationError when the output and truth come from different traces.
EvalReport evaluate(const PipelineOutput& output, const GroundTruth& truth, const EvalOptions& options = {});

Json report_to_json(const EvalReport& report);

}  // namespace tollplaza
