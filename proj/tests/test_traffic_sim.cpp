#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/evaluation.hpp"
#include "tollplaza/traffic_sim.hpp"

using namespace tollplaza;
using namespace tollplaza::testing;

namespace {

std::string trace_bytes(const std::vector<FrameDetections>& frames) {
  std::ostringstream out;
  for (const auto& f : frames) out << serialize_frame(f) << '\n';
  return out.str();
}

ScenarioSpec noisy(std::uint64_t seed) {
  ScenarioSpec s;
  s.rng_seed = seed;
  s.duration_frames = 300;
  s.arrival_rate = 3.0;
  s.noise.dropout = 0.1;
  s.noise.jitter_px = 3;
  s.noise.ocr_char_error = {0.05, 0.1};
  s.noise.spurious_rate = 0.1;
  s.noise.occlusion_probability = 0.3;
  return s;
}

}  // namespace

TEST(Generate, ZeroArrivalRateIsEmpty) {
  ScenarioSpec s;
  s.arrival_rate = 0;
  const auto g = generate(s);
  EXPECT_TRUE(g.truth.vehicles.empty());
  for (const auto& f : g.frames) EXPECT_TRUE(f.detections.empty());
  for (const auto& f : g.truth.frames) EXPECT_TRUE(f.objects.empty());
}

TEST(Generate, SingleNoiseFreeVehicle) {
  ScenarioSpec s;
  s.arrival_rate = 0;
  s.duration_frames = 200;
  s.vehicles = {VehicleSpec{"KXT4821", 2, 20.0, 1, 5}};
  const auto g = generate(s);
  ASSERT_EQ(g.truth.vehicles.size(), 1u);
  const auto& v = g.truth.vehicles[0];
  EXPECT_EQ(v.plate, "KXT4821");
  EXPECT_EQ(v.axles, 2);
  EXPECT_EQ(v.entry_frame, 5);
  ASSERT_GT(v.exit_frame, v.entry_frame);
  for (const auto& f : g.frames) {
    const bool in_span = f.frame_index >= v.entry_frame && f.frame_index <= v.exit_frame;
    std::map<DetectionClass, int> count;
    for (const auto& d : f.detections) {
      ++count[d.cls];
      if (d.cls == DetectionClass::LicensePlate) {
        ASSERT_EQ(d.raw_reads.size(), 2u);
        for (const auto& r : d.raw_reads) EXPECT_EQ(r.text, "KXT4821");
      }
    }
    if (in_span) {
      EXPECT_EQ(count[DetectionClass::Vehicle], 1) << f.frame_index;
      EXPECT_EQ(count[DetectionClass::LicensePlate], 1) << f.frame_index;
      EXPECT_EQ(count[DetectionClass::Wheel], 2) << f.frame_index;
    } else {
      EXPECT_TRUE(f.detections.empty()) << f.frame_index;
    }
  }
  // noise-free boxes equal the truth boxes exactly
  std::map<std::int64_t, std::vector<BoundingBox>> truth_boxes;
  for (const auto& tf : g.truth.frames)
    for (const auto& o : tf.objects) truth_boxes[tf.frame_index].push_back(o.box);
  for (const auto& f : g.frames) {
    std::vector<BoundingBox> emitted;
    for (const auto& d : f.detections) emitted.push_back(d.box);
    EXPECT_EQ(emitted, truth_boxes[f.frame_index]) << f.frame_index;
  }
}

TEST(Generate, AxleCountMatchesWheels) {
  for (int axles = 2; axles <= 6; ++axles) {
    ScenarioSpec s;
    s.arrival_rate = 0;
    s.vehicles = {VehicleSpec{"ABC1234", axles, 15.0, 0, 0}};
    const auto g = generate(s);
    const auto& f = g.frames[static_cast<std::size_t>(g.truth.vehicles[0].entry_frame + 3)];
    int wheels = 0;
    for (const auto& d : f.detections) wheels += d.cls == DetectionClass::Wheel;
    EXPECT_EQ(wheels, axles);
  }
}

TEST(Generate, DeterministicPerSeed) {
  const auto a = generate(noisy(3)), b = generate(noisy(3)), c = generate(noisy(4));
  EXPECT_EQ(trace_bytes(a.frames), trace_bytes(b.frames));
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_NE(trace_bytes(a.frames), trace_bytes(c.frames));
  EXPECT_EQ(a.truth.trace_id, trace_id_of(a.frames));
}

TEST(Generate, StructuralInvariants) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto spec = noisy(seed);
    const auto g = generate(spec);
    // the trace runs until the last vehicle leaves, then tail_frames empty frames
    std::int64_t last_exit = spec.duration_frames - 1;
    for (const auto& v : g.truth.vehicles) last_exit = std::max(last_exit, v.exit_frame);
    ASSERT_EQ(g.frames.size(), static_cast<std::size_t>(last_exit + 1 + spec.tail_frames));
    for (const auto& tf : g.truth.frames) ASSERT_LE(tf.frame_index, last_exit);
    for (std::size_t i = 0; i < g.frames.size(); ++i) {
      ASSERT_EQ(g.frames[i].frame_index, static_cast<std::int64_t>(i));
      if (i) {
        ASSERT_GT(g.frames[i].timestamp_ms, g.frames[i - 1].timestamp_ms);
      }
      for (const auto& d : g.frames[i].detections) {
        ASSERT_LE(d.box.x_min, d.box.x_max);
        ASSERT_GE(d.confidence, 0.0);
        ASSERT_LE(d.confidence, 1.0);
        ASSERT_EQ(d.raw_reads.empty(), d.cls != DetectionClass::LicensePlate || d.raw_reads.empty());
      }
    }
    ASSERT_LE(peak_concurrency(g.truth), spec.max_concurrent);
    std::set<std::string> plates;
    for (const auto& v : g.truth.vehicles) {
      ASSERT_TRUE(PlateFormat::parse("LLLDDDD").matches(v.plate));
      ASSERT_TRUE(plates.insert(v.plate).second) << "duplicate plate";
      ASSERT_GE(v.axles, 2);
      ASSERT_LE(v.axles, 6);
    }
    // the trace parses back byte-identically
    std::istringstream in(trace_bytes(g.frames));
    TraceReader reader(in);
    std::vector<FrameDetections> back;
    while (auto f = reader.next()) back.push_back(*f);
    ASSERT_EQ(trace_bytes(back), trace_bytes(g.frames));
  }
}

TEST(Generate, FilterEngineKeepsOnlyThatEngine) {
  const auto g = generate(noisy(2));
  const auto only = filter_engine(g.frames, "tesseract");
  ASSERT_EQ(only.size(), g.frames.size());
  for (std::size_t i = 0; i < only.size(); ++i) {
    ASSERT_EQ(only[i].detections.size(), g.frames[i].detections.size());
    for (const auto& d : only[i].detections)
      for (const auto& r : d.raw_reads) ASSERT_EQ(r.engine_id, "tesseract");
  }
}

TEST(ScenarioSpec, ValidationAndJson) {
  ScenarioSpec s = noisy(1);
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(scenario_to_json(scenario_from_json(scenario_to_json(s))), scenario_to_json(s));
  s.noise.dropout = 1.5;
  EXPECT_THROW(s.validate(), ValidationError);
  s = noisy(1);
  s.noise.ocr_char_error = {0.1, 0.2, 0.3};  // three values for two engines
  EXPECT_THROW(s.validate(), ValidationError);
  s = noisy(1);
  s.axle_mix = {{0, 1.0}};
  EXPECT_THROW(s.validate(), ValidationError);
  s = noisy(1);
  s.noise.ocr_char_error = {0.2};
  EXPECT_DOUBLE_EQ(s.char_error(0), 0.2);
  EXPECT_DOUBLE_EQ(s.char_error(1), 0.2);
}

TEST(Generate, HigherOcrErrorNeverImprovesPlateAccuracy) {
  // mean over seeds, tolerance for sampling noise
  const std::vector<double> rates{0.0, 0.1, 0.2, 0.35};
  std::vector<double> acc;
  for (double e : rates) {
    double sum = 0;
    int n = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto spec = noisy(seed);
      spec.noise.ocr_char_error = {e};
      const auto g = generate(spec);
      const auto out = replay_trace(g.frames, AppConfig{}, fixed_clock(), g.truth.trace_id);
      sum += evaluate(out, g.truth).plate_accuracy;
      ++n;
    }
    acc.push_back(sum / n);
  }
  for (std::size_t i = 1; i < acc.size(); ++i) EXPECT_LE(acc[i], acc[i - 1] + 0.03) << "rate " << rates[i];
  EXPECT_GT(acc.front(), acc.back());
}

TEST(Truth, JsonRoundTrip) {
  const auto g = generate(noisy(5));
  const auto j = truth_to_json(g.truth);
  EXPECT_EQ(truth_to_json(truth_from_json(j)), j);
  EXPECT_EQ(truth_from_json(j).vehicles.size(), g.truth.vehicles.size());
}
