#include "tollplaza/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace tollplaza {

std::string_view to_string(DetectionClass cls) {
  switch (cls) {
    case DetectionClass::Vehicle: return "Vehicle";
    case DetectionClass::LicensePlate: return "LicensePlate";
    case DetectionClass::Wheel: return "Wheel";
    case DetectionClass::Background: return "Background";
  }
  return "Background";
}

std::optional<DetectionClass> detection_class_from_string(std::string_view name) {
  for (auto cls : kAllDetectionClasses) {
    if (to_string(cls) == name) return cls;
  }
  return std::nullopt;
}

double RawPlateRead::mean_confidence() const noexcept {
  if (char_confidences.empty()) return 0.0;
  return std::accumulate(char_confidences.begin(), char_confidences.end(), 0.0) /
         static_cast<double>(char_confidences.size());
}

Alphabet::Alphabet() : Alphabet("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789") {}

Alphabet::Alphabet(std::string_view chars) : chars_(chars) {
  for (unsigned char c : chars_) table_[c] = true;
}

bool Alphabet::contains(char c) const noexcept {
  return table_[static_cast<unsigned char>(c)];
}

bool Alphabet::accepts(std::string_view text) const noexcept {
  return std::all_of(text.begin(), text.end(), [this](char c) { return contains(c); });
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double area_a = a.area();
  const double area_b = b.area();
  // Zero-area boxes never match anything, themselves included.
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double inter = intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::pair<double, double> box_center(const BoundingBox& b) noexcept {
  return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

bool contains(const BoundingBox& outer, const BoundingBox& inner, double slack) noexcept {
  return inner.x_min >= outer.x_min - slack && inner.y_min >= outer.y_min - slack &&
         inner.x_max <= outer.x_max + slack && inner.y_max <= outer.y_max + slack;
}

double containment_ratio(const BoundingBox& outer, const BoundingBox& inner) noexcept {
  const double area = inner.area();
  if (area <= 0.0) return contains(outer, inner, 0.0) ? 1.0 : 0.0;
  return intersection_area(outer, inner) / area;
}

}  // namespace tollplaza
