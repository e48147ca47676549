#pragma once

// Data-parallel hot loops of the per-frame pipeline. Each kernel has an OpenMP
// version in `kernels` and a plain serial version in `reference`; the two must
// produce identical output and the tests hold them to it.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tollplaza/axle_counter.hpp"
#include "tollplaza/geometry.hpp"
#include "tollplaza/plate_ensemble.hpp"
#include "tollplaza/tracker.hpp"

namespace tollplaza {

/// Per-track input for the fusion + axle stage of one frame.
struct EvidenceWork {
  std::uint64_t track_id = 0;
  std::int64_t frame_index = 0;
  BoundingBox vehicle_box;
  const PlateConsensus* consensus = nullptr;
  std::span<const AxleEstimate> axle_history;
  const Attachment* attachment = nullptr;  ///< may be null: nothing attached
};

struct EvidenceResult {
  std::uint64_t track_id = 0;
  std::optional<PlateReadBatch> plate_batch;
  PlateConsensus consensus;
  bool consensus_changed = false;
  AxleEstimate estimate;
  AxleVerdict verdict;

  friend bool operator==(const EvidenceResult&, const EvidenceResult&) = default;
};

struct EvidenceSettings {
  std::span<const PlateFormat> formats;
  EngineWeightConfig weights;
  AxleConfig axles;
};

/// Pure per-item step shared by both kernel variants.
EvidenceResult evaluate_evidence(const EvidenceWork& work, const EvidenceSettings& settings);

namespace kernels {

/// Row-major |a| x |b| IoU matrix.
std::vector<double> iou_matrix(std::span<const BoundingBox> a, std::span<const BoundingBox> b);

std::vector<EvidenceResult> process_evidence(std::span<const EvidenceWork> work, const EvidenceSettings& settings);

}  // namespace kernels

namespace reference {

std::vector<double> iou_matrix(std::span<const BoundingBox> a, std::span<const BoundingBox> b);

std::vector<EvidenceResult> process_evidence(std::span<const EvidenceWork> work, const EvidenceSettings& settings);

}  // namespace reference

}  // namespace tollplaza
