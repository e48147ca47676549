#include "tollplaza/axle_counter.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace tollplaza {

VehicleClassTable default_class_table() {
  return {{2, "Class-2 (car/light)"},
          {3, "Class-3 (medium)"},
          {4, "Class-4 (truck)"},
          {5, "Class-5 (heavy truck)"}};
}

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

AxleEstimate cluster_wheels(std::span<const WheelObservation> wheels, const BoundingBox& vehicle_box,
                            const std::optional<BoundingBox>& plate_box, const AxleConfig& cfg) {
  AxleEstimate estimate;
  if (!wheels.empty()) estimate.frame_index = wheels.front().frame_index;
  if (wheels.empty()) return estimate;

  // Canonical order so the result does not depend on input order.
  std::vector<WheelObservation> sorted(wheels.begin(), wheels.end());
  std::sort(sorted.begin(), sorted.end(), [](const WheelObservation& a, const WheelObservation& b) {
    const double ax = box_center(a.box).first;
    const double bx = box_center(b.box).first;
    return std::tie(ax, a.confidence, a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max) <
           std::tie(bx, b.confidence, b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max);
  });

  std::vector<double> widths;
  widths.reserve(sorted.size());
  for (const auto& w : sorted) widths.push_back(w.box.width());
  const double gap_threshold = cfg.merge_factor * median(widths);

  struct Cluster {
    double sum_x = 0.0;
    double sum_conf = 0.0;
    int members = 0;
    double last_x = 0.0;
  };
  std::vector<Cluster> clusters;
  for (const auto& w : sorted) {
    const double x = box_center(w.box).first;
    if (clusters.empty() || x - clusters.back().last_x >= gap_threshold) clusters.emplace_back();
    auto& c = clusters.back();
    c.sum_x += x;
    c.sum_conf += w.confidence;
    c.members += 1;
    c.last_x = x;
  }

  const double anchor = plate_box ? box_center(*plate_box).first : vehicle_box.x_min;
  double conf_sum = 0.0;
  int kept_wheels = 0;
  for (const auto& c : clusters) {
    const double center = c.sum_x / c.members;
    if (center < vehicle_box.x_min - cfg.slack || center > vehicle_box.x_max + cfg.slack) continue;
    estimate.cluster_centers.push_back(center - anchor);
    conf_sum += c.sum_conf;
    kept_wheels += c.members;
  }
  estimate.axle_count = static_cast<int>(estimate.cluster_centers.size());
  if (kept_wheels == 0) return estimate;

  const bool plausible = estimate.axle_count >= cfg.plausible_min && estimate.axle_count <= cfg.plausible_max;
  estimate.spatial_confidence = (conf_sum / kept_wheels) * (plausible ? 1.0 : cfg.implausible_penalty);
  return estimate;
}

AxleVerdict validate_temporal(std::span<const AxleEstimate> history, int window) {
  if (history.empty()) throw std::invalid_argument("validate_temporal: empty axle history");
  if (window < 1) throw std::invalid_argument("validate_temporal: window must be positive");
  const std::size_t used = std::min(history.size(), static_cast<std::size_t>(window));
  const auto recent = history.last(used);

  std::map<int, double> mass;
  std::map<int, int> frames;
  double total = 0.0;
  for (const auto& e : recent) {
    mass[e.axle_count] += e.spatial_confidence;
    frames[e.axle_count] += 1;
    total += e.spatial_confidence;
  }

  AxleVerdict verdict;
  verdict.frames_used = static_cast<int>(used);
  if (total > 0.0) {
    double best = -1.0;
    for (const auto& [count, m] : mass) {  // ascending count, so >= prefers the larger
      if (m >= best) {
        best = m;
        verdict.validated_count = count;
      }
    }
    verdict.temporal_confidence = best / total;
  } else {
    // No confident frame at all: plain frame-count vote, zero confidence.
    int best = -1;
    for (const auto& [count, n] : frames) {
      if (n >= best) {
        best = n;
        verdict.validated_count = count;
      }
    }
  }
  return verdict;
}

std::string classify_vehicle(const AxleVerdict& verdict, const VehicleClassTable& table) {
  if (verdict.validated_count <= 1 || table.empty()) return std::string(kUnclassified);
  if (auto it = table.find(verdict.validated_count); it != table.end()) return it->second;
  if (verdict.validated_count > table.rbegin()->first) return table.rbegin()->second;
  // Gap inside the table: take the nearest smaller configured count.
  auto it = table.lower_bound(verdict.validated_count);
  if (it == table.begin()) return std::string(kUnclassified);
  return std::prev(it)->second;
}

}  // namespace tollplaza
