#include "tollplaza/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>

namespace tollplaza {

namespace {

// Below this many cells the thread fork costs more than the loop.
constexpr std::size_t kParallelCells = 256;

}  // namespace

EvidenceResult evaluate_evidence(const EvidenceWork& work, const EvidenceSettings& settings) {
  EvidenceResult out;
  out.track_id = work.track_id;
  out.consensus = *work.consensus;

  std::optional<BoundingBox> plate_box;
  std::vector<WheelObservation> wheels;
  if (work.attachment) {
    const Detection* best_plate = nullptr;
    for (const auto& p : work.attachment->plates) {
      if (!best_plate || p.confidence > best_plate->confidence) best_plate = &p;
    }
    if (best_plate) {
      plate_box = best_plate->box;
      PlateObservation obs;
      obs.frame_index = work.frame_index;
      obs.reads = best_plate->raw_reads;
      obs.fusion = fuse_frame(obs.reads, out.consensus, settings.formats, settings.weights);
      out.consensus = update_consensus(std::move(out.consensus), obs, settings.formats, settings.weights);
      out.plate_batch = PlateReadBatch{work.frame_index, std::move(obs.reads)};
    }
    wheels.reserve(work.attachment->wheels.size());
    for (const auto& w : work.attachment->wheels) wheels.push_back({w.box, w.confidence, work.frame_index});
  }
  const PlateConsensus& before = *work.consensus;
  out.consensus_changed = out.consensus.text != before.text || out.consensus.status != before.status ||
                          out.consensus.fused_confidence != before.fused_confidence;

  out.estimate = cluster_wheels(wheels, work.vehicle_box, plate_box, settings.axles);
  out.estimate.frame_index = work.frame_index;

  const std::size_t window = static_cast<std::size_t>(std::max(1, settings.axles.temporal_window));
  const std::size_t keep = std::min(work.axle_history.size(), window - 1);
  std::vector<AxleEstimate> recent(work.axle_history.end() - static_cast<std::ptrdiff_t>(keep),
                                   work.axle_history.end());
  recent.push_back(out.estimate);
  out.verdict = validate_temporal(recent, settings.axles.temporal_window);
  out.verdict.track_id = work.track_id;
  return out;
}

namespace kernels {

std::vector<double> iou_matrix(std::span<const BoundingBox> a, std::span<const BoundingBox> b) {
  const std::size_t rows = a.size();
  const std::size_t cols = b.size();
  std::vector<double> m(rows * cols);
  const auto n = static_cast<std::int64_t>(rows * cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCells)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    m[idx] = iou(a[idx / cols], b[idx % cols]);
  }
  return m;
}

std::vector<EvidenceResult> process_evidence(std::span<const EvidenceWork> work, const EvidenceSettings& settings) {
  std::vector<EvidenceResult> out(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  const auto n = static_cast<std::int64_t>(work.size());
#pragma omp parallel for schedule(dynamic, 1) if (work.size() > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      out[idx] = evaluate_evidence(work[idx], settings);
    } catch (...) {
      errors[idx] = std::current_exception();  // exceptions must not cross the parallel region
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace kernels

namespace reference {

std::vector<double> iou_matrix(std::span<const BoundingBox> a, std::span<const BoundingBox> b) {
  std::vector<double> m;
  m.reserve(a.size() * b.size());
  for (const auto& x : a) {
    for (const auto& y : b) m.push_back(iou(x, y));
  }
  return m;
}

std::vector<EvidenceResult> process_evidence(std::span<const EvidenceWork> work, const EvidenceSettings& settings) {
  std::vector<EvidenceResult> out;
  out.reserve(work.size());
  for (const auto& w : work) out.push_back(evaluate_evidence(w, settings));
  return out;
}

}  // namespace reference

}  // namespace tollplaza
