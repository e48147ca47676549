#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tollplaza {

/// Axis-aligned box in native camera pixels.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x_min <= x_max && y_min <= y_max; }

  BoundingBox translated(double dx, double dy) const noexcept {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class DetectionClass { Vehicle, LicensePlate, Wheel, Background };

inline constexpr DetectionClass kAllDetectionClasses[] = {
    DetectionClass::Vehicle, DetectionClass::LicensePlate, DetectionClass::Wheel,
    DetectionClass::Background};

std::string_view to_string(DetectionClass cls);
std::optional<DetectionClass> detection_class_from_string(std::string_view name);

struct RawPlateRead {
  std::string engine_id;
  std::string text;
  std::vector<double> char_confidences;

  double mean_confidence() const noexcept;

  friend bool operator==(const RawPlateRead&, const RawPlateRead&) = default;
};

struct Detection {
  BoundingBox box;
  DetectionClass cls = DetectionClass::Background;
  double confidence = 0.0;
  std::vector<RawPlateRead> raw_reads;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct FrameDetections {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<Detection> detections;

  friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

/// Characters a plate read may contain. Default is A-Z and 0-9.
class Alphabet {
 public:
  Alphabet();
  explicit Alphabet(std::string_view chars);

  bool contains(char c) const noexcept;
  bool accepts(std::string_view text) const noexcept;
  const std::string& chars() const noexcept { return chars_; }

 private:
  std::string chars_;
  bool table_[256] = {};
};

/// Intersection over union; 0 when the union has zero area.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;

std::pair<double, double> box_center(const BoundingBox& b) noexcept;

/// True iff `inner` lies within `outer` grown by `slack` on every side.
bool contains(const BoundingBox& outer, const BoundingBox& inner, double slack) noexcept;

/// Fraction of `inner`'s area covered by `outer`; 1 for a degenerate inner box
/// lying inside outer, 0 otherwise.
double containment_ratio(const BoundingBox& outer, const BoundingBox& inner) noexcept;

}  // namespace tollplaza
