#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tollplaza/geometry.hpp"
#include "tollplaza/trace_io.hpp"

namespace tollplaza {

/// A vehicle pinned by the scenario instead of drawn from the arrival process.
struct VehicleSpec {
  std::string plate;
  int axles = 2;
  double speed = 15.0;  ///< px per frame, moving toward +x
  int lane = 0;
  std::int64_t arrival_frame = 0;
};

/// Detector and OCR imperfections.
///
/// OCR errors are correlated per vehicle: each (vehicle, engine, character)
/// is "hard" with probability q and then misread in a fraction `ocr_hard_error`
/// of frames, always to the same confusable character; the remaining error mass
/// is spread uniformly over frames. `ocr_char_error` is the marginal
/// per-character error rate of each engine and `ocr_error_persistence` the share
/// of it that comes from hard characters.
struct NoiseModel {
  double dropout = 0.0;  ///< per detection
  double jitter_px = 0.0;
  std::vector<double> ocr_char_error;  ///< per engine; a single value applies to all
  double ocr_error_persistence = 0.6;
  double ocr_hard_error = 0.6;
  double spurious_rate = 0.0;  ///< spurious detections per frame (Bernoulli)
  double occlusion_probability = 0.0;  ///< per vehicle
  int occlusion_frames = 8;
};

struct ScenarioSpec {
  std::uint64_t rng_seed = 1;
  int duration_frames = 300;
  double arrival_rate = 2.0;  ///< vehicles per 100 frames
  double fps = 30.0;
  int image_width = 1920;
  int image_height = 1080;
  int lanes = 4;
  int max_concurrent = 8;
  std::vector<std::string> plate_formats{"LLLDDDD"};
  std::map<int, double> axle_mix{{2, 0.60}, {3, 0.15}, {4, 0.10}, {5, 0.10}, {6, 0.05}};
  double speed_min = 10.0;
  double speed_max = 25.0;
  std::vector<VehicleSpec> vehicles;
  NoiseModel noise;
  std::vector<std::string> engines{"easyocr", "tesseract"};
  int tail_frames = 40;  ///< empty frames appended so every track can exit

  void validate() const;  // throws ValidationError
  double char_error(std::size_t engine) const noexcept;
};

ScenarioSpec scenario_from_json(const Json& doc);
Json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct TruthObject {
  std::uint64_t vehicle_id = 0;
  DetectionClass cls = DetectionClass::Vehicle;
  BoundingBox box;
  friend bool operator==(const TruthObject&, const TruthObject&) = default;
};

struct TruthFrame {
  std::int64_t frame_index = 0;
  std::vector<TruthObject> objects;  ///< visible, unoccluded objects only
  friend bool operator==(const TruthFrame&, const TruthFrame&) = default;
};

struct TruthVehicle {
  std::uint64_t vehicle_id = 0;
  std::string plate;
  int axles = 2;
  int lane = 0;
  double speed = 0.0;
  std::int64_t entry_frame = 0;
  std::int64_t exit_frame = 0;  ///< last frame the vehicle is in view
  friend bool operator==(const TruthVehicle&, const TruthVehicle&) = default;
};

struct GroundTruth {
  std::string trace_id;
  std::vector<TruthVehicle> vehicles;
  std::vector<TruthFrame> frames;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

Json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const Json& doc);
GroundTruth load_truth(const std::filesystem::path& path);
void save_truth(const std::filesystem::path& path, const GroundTruth& truth);

struct GeneratedScenario {
  std::vector<FrameDetections> frames;
  GroundTruth truth;
};

/// Deterministic for a given spec, seed included.
GeneratedScenario generate(const ScenarioSpec& spec);

/// Copy of `frames` keeping only the raw reads produced by `engine_id`.
std::vector<FrameDetections> filter_engine(const std::vector<FrameDetections>& frames, const std::string& engine_id);

/// Peak number of vehicles simultaneously in view.
int peak_concurrency(const GroundTruth& truth);

}  // namespace tollplaza
