#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tollplaza/geometry.hpp"
#include "tollplaza/pipeline.hpp"

namespace tollplaza::testing {

// Hand-rolled generator for property tests. Seeded per case so a failure
// message with the seed reproduces it.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return real(0.0, 1.0) < p; }

  BoundingBox box(double max_coord = 1000.0, double min_size = 1.0, double max_size = 300.0) {
    const double x = real(0, max_coord), y = real(0, max_coord);
    return {x, y, x + real(min_size, max_size), y + real(min_size, max_size)};
  }

  std::string text(std::size_t len, std::string_view alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789") {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[static_cast<std::size_t>(integer(0, static_cast<int>(alphabet.size()) - 1))];
    return s;
  }

  std::string plate() { return text(3, "ABCDEFGHIJKLMNOPQRSTUVWXYZ") + text(4, "0123456789"); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), rng_);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline Detection vehicle(BoundingBox b, double conf = 0.9) { return {b, DetectionClass::Vehicle, conf, {}}; }
inline Detection wheel(BoundingBox b, double conf = 0.8) { return {b, DetectionClass::Wheel, conf, {}}; }

inline RawPlateRead read(std::string engine, std::string text, double conf) {
  std::vector<double> c(text.size(), conf);
  return {std::move(engine), std::move(text), std::move(c)};
}

inline Detection plate(BoundingBox b, std::vector<RawPlateRead> reads, double conf = 0.9) {
  return {b, DetectionClass::LicensePlate, conf, std::move(reads)};
}

inline FrameDetections frame(std::int64_t index, std::vector<Detection> dets = {}) {
  return {index, index * 33, std::move(dets)};
}

inline WallClock fixed_clock(std::int64_t ms = 1'700'000'000'000) {
  return [ms] { return ms; };
}

// A scripted single vehicle moving right at `speed` px/frame: boxes for
// `frames` frames starting at `start`, with one plate read per frame by both
// engines and two wheels.
inline std::vector<FrameDetections> single_pass(const std::string& text, int frames, std::int64_t start = 0,
                                                double speed = 20.0, int tail = 20) {
  std::vector<FrameDetections> out;
  for (int i = 0; i < frames; ++i) {
    const double x = 50.0 + speed * i;
    const BoundingBox v{x, 500, x + 300, 650};
    const BoundingBox p{x + 200, 580, x + 280, 606};
    out.push_back(frame(start + i, {vehicle(v), plate(p, {read("easyocr", text, 0.95), read("tesseract", text, 0.93)}),
                                    wheel({x + 20, 606, x + 64, 650}), wheel({x + 236, 606, x + 280, 650})}));
  }
  for (int i = 0; i < tail; ++i) out.push_back(frame(start + frames + i));
  return out;
}

}  // namespace tollplaza::testing
