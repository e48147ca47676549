// Serial reference vs OpenMP kernels on per-frame shaped inputs.
#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>

#include "tollplaza/config.hpp"
#include "tollplaza/kernels.hpp"
#include "tollplaza/pipeline.hpp"
#include "tollplaza/traffic_sim.hpp"

using namespace tollplaza;

namespace {

std::vector<BoundingBox> random_boxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(0, 1800), y(0, 1000), w(20, 400);
  std::vector<BoundingBox> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = x(rng), y0 = y(rng);
    out.push_back({x0, y0, x0 + w(rng), y0 + w(rng) / 2});
  }
  return out;
}

struct EvidenceFixture {
  std::vector<PlateConsensus> consensus;
  std::vector<Attachment> attachments;
  std::vector<std::vector<AxleEstimate>> history;
  std::vector<EvidenceWork> work;
  AppConfig cfg;

  explicit EvidenceFixture(std::size_t tracks) {
    consensus.resize(tracks);
    attachments.resize(tracks);
    history.resize(tracks);
    for (std::size_t i = 0; i < tracks; ++i) {
      const double x0 = 200.0 * static_cast<double>(i);
      consensus[i].track_id = i + 1;
      Detection plate{{x0 + 300, 600, x0 + 380, 626}, DetectionClass::LicensePlate, 0.9, {}};
      plate.raw_reads = {{"easyocr", "ABC1234", {0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9}},
                         {"tesseract", "A8C1234", {0.9, 0.5, 0.9, 0.9, 0.9, 0.9, 0.9}}};
      attachments[i].plates.push_back(plate);
      for (int k = 0; k < 3; ++k) {
        const double cx = x0 + 40 + 120 * k;
        attachments[i].wheels.push_back({{cx, 650, cx + 44, 694}, DetectionClass::Wheel, 0.8, {}});
      }
      for (int f = 0; f < 9; ++f) history[i].push_back({f, 3, 0.8, {}});
    }
    for (std::size_t i = 0; i < tracks; ++i) {
      const double x0 = 200.0 * static_cast<double>(i);
      work.push_back({i + 1, 10, {x0, 400, x0 + 420, 700}, &consensus[i], history[i], &attachments[i]});
    }
  }

  EvidenceSettings settings() const { return {cfg.plate_formats, cfg.ensemble, cfg.axles}; }
};

void BM_IouReference(benchmark::State& state) {
  const auto a = random_boxes(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = random_boxes(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::iou_matrix(a, b));
}

void BM_IouOpenMP(benchmark::State& state) {
  const auto a = random_boxes(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = random_boxes(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::iou_matrix(a, b));
}

void BM_EvidenceReference(benchmark::State& state) {
  EvidenceFixture fx(static_cast<std::size_t>(state.range(0)));
  const auto s = fx.settings();
  for (auto _ : state) benchmark::DoNotOptimize(reference::process_evidence(fx.work, s));
}

void BM_EvidenceOpenMP(benchmark::State& state) {
  EvidenceFixture fx(static_cast<std::size_t>(state.range(0)));
  const auto s = fx.settings();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::process_evidence(fx.work, s));
}

void BM_PipelineFrame(benchmark::State& state) {
  ScenarioSpec spec;
  spec.rng_seed = 7;
  spec.duration_frames = 600;
  spec.arrival_rate = 4.0;
  spec.noise.dropout = 0.1;
  spec.noise.jitter_px = 2.0;
  spec.noise.ocr_char_error = {0.05};
  const auto sc = generate(spec);
  AppConfig cfg;
  std::size_t frames = 0;
  for (auto _ : state) {
    TollPipeline p(cfg, [] { return std::int64_t{0}; });
    for (const auto& f : sc.frames) benchmark::DoNotOptimize(p.process_frame(f));
    frames += sc.frames.size();
  }
  state.counters["frames/s"] = benchmark::Counter(static_cast<double>(frames), benchmark::Counter::kIsRate);
}

}  // namespace

BENCHMARK(BM_IouReference)->Arg(8)->Arg(32)->Arg(128);
BENCHMARK(BM_IouOpenMP)->Arg(8)->Arg(32)->Arg(128);
BENCHMARK(BM_EvidenceReference)->Arg(1)->Arg(8)->Arg(32);
BENCHMARK(BM_EvidenceOpenMP)->Arg(1)->Arg(8)->Arg(32);
BENCHMARK(BM_PipelineFrame)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
