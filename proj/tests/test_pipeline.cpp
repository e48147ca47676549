#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/evaluation.hpp"
#include "tollplaza/pipeline.hpp"
#include "tollplaza/traffic_sim.hpp"

using namespace tollplaza;
using namespace tollplaza::testing;

namespace {

PipelineConfig batch_cfg(int optimal, double threshold = 0.8) {
  PipelineConfig c;
  c.optimal_batch_size = optimal;
  c.load_threshold = threshold;
  return c;
}

Track exited_track(std::uint64_t id = 1) {
  Track t;
  t.track_id = id;
  t.status = TrackStatus::Exited;
  t.activated = true;
  t.entry_timestamp = 1000;
  t.exit_timestamp = 4000;
  return t;
}

PlateConsensus locked(std::string text = "ABC1234") {
  PlateConsensus c;
  c.text = std::move(text);
  c.fused_confidence = 0.93;
  c.status = PlateStatus::Locked;
  c.read_frames = 5;
  c.format_id = "LLL-DDDD";
  return c;
}

std::vector<TollTransaction> run_all(const std::vector<FrameDetections>& frames, const std::vector<int>& schedule,
                                     const AppConfig& cfg = {}) {
  TollPipeline p(cfg, fixed_clock());
  std::vector<TollTransaction> out;
  std::size_t pos = 0, k = 0;
  while (pos < frames.size()) {
    const std::size_t n = std::min<std::size_t>(schedule.empty() ? 1 : static_cast<std::size_t>(schedule[k++ % schedule.size()]),
                                                frames.size() - pos);
    for (auto& r : p.process_frame_batch(std::span(frames).subspan(pos, n)))
      for (auto& t : r.transactions) out.push_back(t);
    pos += n;
  }
  return out;
}

ScenarioSpec busy_spec(std::uint64_t seed, bool noisy) {
  ScenarioSpec s;
  s.rng_seed = seed;
  s.duration_frames = 400;
  s.arrival_rate = 3.0;
  if (noisy) {
    s.noise.dropout = 0.1;
    s.noise.jitter_px = 3;
    s.noise.ocr_char_error = {0.08, 0.12};
    s.noise.spurious_rate = 0.05;
    s.noise.occlusion_probability = 0.2;
  }
  return s;
}

}  // namespace

TEST(AdjustBatchSize, Examples) {
  EXPECT_EQ(adjust_batch_size(0.5, batch_cfg(8)), 8);
  EXPECT_EQ(adjust_batch_size(0.9, batch_cfg(8)), 4);
  EXPECT_EQ(adjust_batch_size(0.9, batch_cfg(1)), 1);
  EXPECT_EQ(adjust_batch_size(0.8, batch_cfg(8)), 8);  // strictly above the threshold halves
  EXPECT_EQ(adjust_batch_size(1.0, batch_cfg(7)), 3);
}

TEST(FinalizeTransaction, LockedTwoAxles) {
  AppConfig cfg;
  const auto t = finalize_transaction(exited_track(), locked(), {1, 2, 0.9, 10}, cfg, "cam0-000001", 42);
  EXPECT_FALSE(t.review_required);
  EXPECT_EQ(t.vehicle_class, "Class-2 (car/light)");
  EXPECT_EQ(t.toll_amount, cfg.pipeline.rate_table.at("Class-2 (car/light)"));
  EXPECT_EQ(t.plate_text, "ABC1234");
  EXPECT_EQ(t.entry_timestamp, 1000);
  EXPECT_EQ(t.exit_timestamp, 4000);
  EXPECT_EQ(t.created_at, 42);
  EXPECT_EQ(t.axle_count, 2);
}

TEST(FinalizeTransaction, ScanningPlateNeedsReview) {
  auto c = locked();
  c.status = PlateStatus::Scanning;
  const auto t = finalize_transaction(exited_track(), c, {1, 2, 0.9, 10}, AppConfig{}, "id", 0);
  EXPECT_TRUE(t.review_required);
  EXPECT_EQ(t.plate_status, PlateStatus::Scanning);
}

TEST(FinalizeTransaction, ZeroAxlesUnclassified) {
  AppConfig cfg;
  const auto t = finalize_transaction(exited_track(), locked(), {1, 0, 0.0, 0}, cfg, "id", 0);
  EXPECT_EQ(t.vehicle_class, kUnclassified);
  EXPECT_TRUE(t.review_required);
  EXPECT_EQ(t.toll_amount, cfg.pipeline.rate_table.at(std::string(kUnclassified)));
}

TEST(FinalizeTransaction, NonExitedRejected) {
  for (auto s : {TrackStatus::Tentative, TrackStatus::Active, TrackStatus::Occluded}) {
    auto t = exited_track();
    t.status = s;
    EXPECT_THROW(finalize_transaction(t, locked(), {}, AppConfig{}, "id", 0), StateError);
  }
  auto t = exited_track();
  t.exit_timestamp.reset();
  EXPECT_THROW(finalize_transaction(t, locked(), {}, AppConfig{}, "id", 0), StateError);
}

TEST(Pipeline, SinglePassBillsOnce) {
  const auto frames = single_pass("ABC1234", 30);
  const auto txns = run_all(frames, {});
  ASSERT_EQ(txns.size(), 1u);
  const auto& t = txns[0];
  EXPECT_EQ(t.plate_text, "ABC1234");
  EXPECT_EQ(t.plate_status, PlateStatus::Locked);
  EXPECT_EQ(t.axle_count, 2);
  EXPECT_FALSE(t.review_required);
  EXPECT_EQ(t.entry_timestamp, 0);
  EXPECT_EQ(t.transaction_id, make_transaction_id("cam0", t.track_id));
  // exit is declared patience + 1 frames after the last sighting
  EXPECT_EQ(t.exit_timestamp, (29 + TrackerConfig{}.occlusion_patience_frames + 1) * 33);
}

TEST(Pipeline, FlickerIsNotBilled) {
  std::vector<FrameDetections> frames{frame(0, {vehicle({0, 0, 300, 150})}), frame(1, {vehicle({5, 0, 305, 150})})};
  for (int i = 2; i < 30; ++i) frames.push_back(frame(i));
  EXPECT_TRUE(run_all(frames, {}).empty());
}

TEST(Pipeline, EventsAreCausalPerTrack) {
  TollPipeline p(AppConfig{}, fixed_clock());
  std::vector<std::string> kinds;
  for (const auto& f : single_pass("ABC1234", 20)) {
    for (const auto& e : p.process_frame(f).events) {
      if (const auto* te = std::get_if<TrackEvent>(&e)) kinds.push_back(std::string(to_string(te->type)));
      if (std::holds_alternative<TollTransaction>(e)) kinds.push_back("Transaction");
      if (std::holds_alternative<PlateUpdate>(e) && kinds.back() != "Plate") kinds.push_back("Plate");
    }
  }
  ASSERT_GE(kinds.size(), 4u);
  EXPECT_EQ(kinds.front(), "Created");
  EXPECT_EQ(kinds[kinds.size() - 2], "Exited");
  EXPECT_EQ(kinds.back(), "Transaction");
}

TEST(Pipeline, StreamOrderErrors) {
  TollPipeline p(AppConfig{}, fixed_clock());
  p.process_frame(frame(0));
  EXPECT_THROW(p.process_frame(frame(2)), StreamOrderError);
  EXPECT_THROW(p.process_frame(frame(0)), StreamOrderError);
  FrameDetections back = frame(1);
  back.timestamp_ms = -5;
  EXPECT_THROW(p.process_frame(back), StreamOrderError);
  EXPECT_NO_THROW(p.process_frame(frame(1)));
}

TEST(Pipeline, BatchIsValidatedBeforeAnyProcessing) {
  TollPipeline p(AppConfig{}, fixed_clock());
  const std::vector<FrameDetections> bad{frame(0, {vehicle({0, 0, 10, 10})}), frame(1), frame(3)};
  EXPECT_THROW(p.process_frame_batch(bad), StreamOrderError);
  EXPECT_FALSE(p.last_frame_index());
  EXPECT_TRUE(p.tracker().tracks().empty());
}

TEST(ManageMemory, Examples) {
  AppConfig cfg;
  cfg.pipeline.stale_ttl_ms = 1000;
  {
    TollPipeline p(cfg, fixed_clock());
    for (const auto& f : single_pass("ABC1234", 10, 0, 20, 0)) p.process_frame(f);
    EXPECT_EQ(p.manage_memory(1'000'000), 0u);  // still live
  }
  TollPipeline p(cfg, fixed_clock());
  std::string id;
  for (const auto& f : single_pass("ABC1234", 10))
    for (auto& t : p.process_frame(f).transactions) id = t.transaction_id;
  ASSERT_FALSE(id.empty());
  const auto exit_ts = p.tracker().tracks().front().exit_timestamp.value();
  EXPECT_EQ(p.pending_persistence(), 1u);
  EXPECT_EQ(p.manage_memory(exit_ts + 5000), 0u);  // write still pending
  p.mark_persisted(id);
  EXPECT_EQ(p.manage_memory(exit_ts + 1000), 0u);  // not yet past the TTL
  EXPECT_EQ(p.manage_memory(exit_ts + 1001), 1u);
  EXPECT_EQ(p.resident_records(), 0u);
  EXPECT_TRUE(p.tracker().tracks().empty());
  EXPECT_EQ(p.manage_memory(exit_ts + 9000), 0u);
}

TEST(PipelineProperty, BatchingTransparency) {
  const std::vector<std::vector<int>> schedules{{1}, {4}, {8}, {3, 1, 7}, {2, 8, 5, 1}};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto g = generate(busy_spec(seed, seed % 2 == 0));
    Json reference;
    for (const auto& s : schedules) {
      Json txns = Json::array();
      for (const auto& t : run_all(g.frames, s)) txns.push_back(transaction_to_json(t));
      if (reference.is_null()) reference = txns;
      ASSERT_EQ(txns.dump(), reference.dump()) << "seed " << seed;
    }
    ASSERT_FALSE(reference.empty());
  }
}

TEST(PipelineProperty, ExactlyOnceAndConservation) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto g = generate(busy_spec(seed, true));
    TollPipeline p(AppConfig{}, fixed_clock());
    std::set<std::uint64_t> billed, activated_exits;
    std::size_t transactions = 0;
    for (const auto& f : g.frames) {
      auto r = p.process_frame(f);
      for (const auto& e : r.events) {
        const auto* te = std::get_if<TrackEvent>(&e);
        if (te && te->type == TrackEventType::Exited && p.tracker().find(te->track_id)->activated)
          activated_exits.insert(te->track_id);
      }
      for (const auto& t : r.transactions) {
        ++transactions;
        ASSERT_TRUE(billed.insert(t.track_id).second) << "track billed twice";
        ASSERT_EQ(t.review_required, t.plate_status != PlateStatus::Locked || t.vehicle_class == kUnclassified);
        ASSERT_LE(t.entry_timestamp, t.exit_timestamp);
      }
    }
    // conservation: every activated track that exited is billed exactly once
    EXPECT_EQ(billed, activated_exits) << "seed " << seed;
    EXPECT_EQ(transactions, billed.size());
    for (const auto& t : p.tracker().tracks()) EXPECT_EQ(t.status, TrackStatus::Exited);
  }
}

TEST(PipelineProperty, MemoryBound) {
  AppConfig cfg;
  cfg.pipeline.stale_ttl_ms = 2000;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto g = generate(busy_spec(seed, seed % 2 == 1));
    TollPipeline p(cfg, fixed_clock());
    for (const auto& f : g.frames) {
      for (auto& t : p.process_frame(f).transactions) p.mark_persisted(t.transaction_id);
      p.manage_memory(f.timestamp_ms);
      std::size_t live = 0, recent_exits = 0;
      for (const auto& t : p.tracker().tracks()) {
        if (t.status != TrackStatus::Exited) ++live;
        else if (f.timestamp_ms - *t.exit_timestamp <= cfg.pipeline.stale_ttl_ms) ++recent_exits;
      }
      ASSERT_EQ(p.tracker().tracks().size(), live + recent_exits);
      ASSERT_LE(p.resident_records(), live + recent_exits);
    }
  }
}

TEST(PipelineProperty, SteadyStateLatencySmoke) {
  const auto g = generate(busy_spec(11, true));
  TollPipeline p(AppConfig{}, fixed_clock());
  double worst_mean = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& f : g.frames) p.process_frame(f);
  worst_mean = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
               static_cast<double>(g.frames.size());
  EXPECT_LT(worst_mean, 45.0);
}

TEST(Pipeline, OutputFrameOwners) {
  TollPipeline p(AppConfig{}, fixed_clock());
  const auto frames = single_pass("ABC1234", 5, 0, 20, 0);
  FrameReport last;
  for (const auto& f : frames) last = p.process_frame(f);
  const auto out = make_output_frame(frames.back(), last);
  ASSERT_EQ(out.detections.size(), 4u);
  const auto owner = out.detections[0].track_id;
  ASSERT_TRUE(owner);
  for (const auto& d : out.detections) EXPECT_EQ(d.track_id, owner);
}
