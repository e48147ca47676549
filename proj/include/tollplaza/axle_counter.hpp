#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollplaza/geometry.hpp"

namespace tollplaza {

struct WheelObservation {
  BoundingBox box;
  double confidence = 0.0;
  std::int64_t frame_index = 0;
};

/// One frame's axle reading for one vehicle. Cluster centers are horizontal
/// offsets from the anchor (plate center, or the vehicle's left edge when no
/// plate was seen), so estimates from different frames line up.
struct AxleEstimate {
  std::int64_t frame_index = 0;
  int axle_count = 0;
  double spatial_confidence = 0.0;
  std::vector<double> cluster_centers;

  friend bool operator==(const AxleEstimate&, const AxleEstimate&) = default;
};

struct AxleVerdict {
  std::uint64_t track_id = 0;
  int validated_count = 0;
  double temporal_confidence = 0.0;
  int frames_used = 0;

  friend bool operator==(const AxleVerdict&, const AxleVerdict&) = default;
};

struct AxleConfig {
  double merge_factor = 0.6;      ///< gap threshold as a fraction of median wheel width
  int plausible_min = 2;
  int plausible_max = 9;
  double implausible_penalty = 0.5;
  int temporal_window = 10;
  double slack = 10.0;            ///< px a cluster center may sit outside the vehicle box
};

inline constexpr std::string_view kUnclassified = "Unclassified";

/// axle count -> class label. Counts above the largest key map to its class;
/// 0 and 1 are always Unclassified.
using VehicleClassTable = std::map<int, std::string>;

VehicleClassTable default_class_table();

AxleEstimate cluster_wheels(std::span<const WheelObservation> wheels, const BoundingBox& vehicle_box,
                            const std::optional<BoundingBox>& plate_box, const AxleConfig& cfg = {});

/// Confidence-weighted vote over the most recent `window` estimates. Ties go to
/// the larger count. Throws std::invalid_argument on an empty history.
AxleVerdict validate_temporal(std::span<const AxleEstimate> history, int window = 10);

std::string classify_vehicle(const AxleVerdict& verdict, const VehicleClassTable& table);

}  // namespace tollplaza
