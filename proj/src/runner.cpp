#include "tollplaza/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <thread>

#include "tollplaza/errors.hpp"
#include "tollplaza/evaluation.hpp"

namespace tollplaza {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::max(rank, 1.0)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

LatencySummary summarize(const std::vector<double>& samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  double sum = 0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  s.p50 = percentile(samples, 0.50);
  s.p95 = percentile(samples, 0.95);
  s.p99 = percentile(samples, 0.99);
  s.max = *std::max_element(samples.begin(), samples.end());
  return s;
}

Json latency_to_json(const LatencySummary& s) {
  return {{"count", s.count}, {"mean", round6(s.mean)}, {"p50", round6(s.p50)},
          {"p95", round6(s.p95)}, {"p99", round6(s.p99)}, {"max", round6(s.max)}};
}

Json metrics_to_json(const RunMetrics& m) {
  Json sizes = Json::object();
  for (const auto& [k, v] : m.batch_sizes) sizes[std::to_string(k)] = v;
  return {{"trace_id", m.trace_id},
          {"frames", m.frames},
          {"batches", m.batches},
          {"batch_sizes", sizes},
          {"core_latency_ms", latency_to_json(summarize(m.core_ms))},
          {"frame_latency_ms", latency_to_json(summarize(m.frame_ms))},
          {"store_put_ms", latency_to_json(summarize(m.store_put_ms))},
          {"transactions", m.transactions},
          {"persisted", m.persisted},
          {"store_failures", m.store_failures},
          {"cleanup_runs", m.cleanup_runs},
          {"cleanup_failures", m.cleanup_failures},
          {"archived", m.archived},
          {"deleted", m.deleted},
          {"evicted", m.evicted},
          {"events_published", m.events_published},
          {"overflow_disconnects", m.overflow_disconnects},
          {"wall_ms", round6(m.wall_ms)},
          {"error", m.error.empty() ? Json(nullptr) : Json(m.error)}};
}

FrameSource vector_source(std::vector<FrameDetections> frames) {
  auto data = std::make_shared<std::vector<FrameDetections>>(std::move(frames));
  auto pos = std::make_shared<std::size_t>(0);
  return {[data, pos]() -> std::optional<FrameDetections> {
            if (*pos >= data->size()) return std::nullopt;
            return (*data)[(*pos)++];
          },
          [data] { return trace_id_of(*data); }};
}

FrameSource stream_source(std::istream& in, Alphabet alphabet) {
  auto reader = std::make_shared<TraceReader>(in, std::move(alphabet));
  return {[reader] { return reader->next(); }, [reader] { return reader->trace_id(); }};
}

PipelineRunner::PipelineRunner(AppConfig cfg, std::unique_ptr<TransactionStore> store, RunnerOptions options,
                               WallClock clock)
    : cfg_(std::move(cfg)),
      store_(std::move(store)),
      options_(std::move(options)),
      clock_(std::move(clock)),
      hub_(cfg_.gateway.client_buffer),
      gateway_(*store_, hub_, cfg_.plate_formats, Alphabet(cfg_.alphabet), cfg_.gateway, clock_) {
  cfg_.validate();
}

RunMetrics PipelineRunner::run(FrameSource source, std::ostream* output) {
  RunMetrics m;
  const auto started = Clock::now();
  TollPipeline pipeline(cfg_, clock_);
  BoundedQueue<FrameDetections> input(options_.queue_capacity);
  BoundedQueue<TollTransaction> to_store(std::numeric_limits<std::size_t>::max());

  std::mutex ack_mu;
  std::vector<std::string> acks;
  std::mutex metric_mu;  // guards the writer's fields of m
  std::string ingest_error;

  std::thread ingest([&] {
    try {
      while (auto f = source.next()) {
        if (!input.push(std::move(*f))) break;
      }
    } catch (const std::exception& e) {
      ingest_error = e.what();
    }
    input.close();
  });

  std::thread writer([&] {
    auto next_cleanup = clock_() + cfg_.store.cleanup_interval_ms;
    auto cleanup_if_due = [&] {
      const auto now = clock_();
      if (now < next_cleanup) return;
      next_cleanup = now + cfg_.store.cleanup_interval_ms;
      try {
        const auto r = store_->archive_and_cleanup(now, cfg_.store.archive_age_ms, cfg_.store.delete_age_ms);
        std::lock_guard lock(metric_mu);
        ++m.cleanup_runs;
        m.archived += r.archived;
        m.deleted += r.deleted;
      } catch (const std::exception&) {
        std::lock_guard lock(metric_mu);
        ++m.cleanup_failures;
      }
    };
    while (auto txn = to_store.pop()) {
      bool ok = false;
      for (int attempt = 0; attempt < std::max(1, options_.store_put_attempts) && !ok; ++attempt) {
        if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        const auto t0 = Clock::now();
        try {
          // put is idempotent for an identical payload, so a retry after an
          // ambiguous failure cannot double-insert
          hub_.publish_after([&]() -> std::optional<EventMessage> {
            store_->put(*txn);
            return to_message(PipelineEvent{*txn});
          });
          ok = true;
        } catch (const StoreError&) {
        } catch (const ConflictError&) {
          break;
        }
        std::lock_guard lock(metric_mu);
        m.store_put_ms.push_back(ms_between(t0, Clock::now()));
      }
      {
        std::lock_guard lock(metric_mu);
        ok ? ++m.persisted : ++m.store_failures;
      }
      if (ok) {
        std::lock_guard lock(ack_mu);
        acks.push_back(txn->transaction_id);
      }
      cleanup_if_due();
    }
  });

  auto drain_acks = [&] {
    std::vector<std::string> got;
    {
      std::lock_guard lock(ack_mu);
      got.swap(acks);
    }
    for (const auto& id : got) pipeline.mark_persisted(id);
  };

  if (output && options_.trace_id) *output << output_header_line(*options_.trace_id, cfg_.pipeline.stream_id) << '\n';

  std::vector<FrameDetections> batch;
  std::vector<FrameReport> reports;
  std::vector<Clock::time_point> marks;
  std::size_t frames_since_stats = 0;
  std::string stage_error;

  while (true) {
    auto first = input.pop();
    if (!first) break;
    const double load = static_cast<double>(input.size() + 1) / static_cast<double>(input.capacity());
    const int want = adjust_batch_size(load, cfg_.pipeline);
    batch.clear();
    batch.push_back(std::move(*first));
    while (static_cast<int>(batch.size()) < want) {
      auto more = input.try_pop();
      if (!more) break;
      batch.push_back(std::move(*more));
    }

    drain_acks();
    reports.clear();
    marks.clear();
    marks.push_back(Clock::now());
    try {
      pipeline.process_frame_batch(batch, [&](FrameReport&& r) {
        marks.push_back(Clock::now());
        reports.push_back(std::move(r));
      });
    } catch (const std::exception& e) {
      stage_error = e.what();
      break;
    }
    ++m.batches;
    ++m.batch_sizes[static_cast<int>(batch.size())];

    for (std::size_t i = 0; i < reports.size(); ++i) {
      auto& r = reports[i];
      const auto p0 = Clock::now();
      for (const auto& e : r.events) {
        if (std::holds_alternative<TollTransaction>(e)) continue;  // published by the writer after persistence
        hub_.publish(to_message(e));
      }
      const double fanout = ms_between(p0, Clock::now());
      const double core = ms_between(marks[i], marks[i + 1]);
      m.core_ms.push_back(core);
      m.frame_ms.push_back(core + fanout);

      for (auto& t : r.transactions) {
        ++m.transactions;
        if (output) *output << output_transaction_line(t) << '\n';
        to_store.push(t);
      }
      if (output) *output << output_frame_line(make_output_frame(batch[i], r)) << '\n';
      ++m.frames;

      if (cfg_.gateway.stats_interval_frames > 0 && ++frames_since_stats >= static_cast<std::size_t>(cfg_.gateway.stats_interval_frames)) {
        frames_since_stats = 0;
        gateway_.set_live_tracks(pipeline.tracker().live_count());
        try {
          hub_.publish(EventMessage{EventType::StatsSnapshot, stats_to_json(gateway_.get_stats()), 0});
        } catch (const StoreError&) {
        }
      }
    }
    m.evicted += pipeline.manage_memory(batch.back().timestamp_ms);
  }

  input.close();
  ingest.join();
  to_store.close();
  writer.join();
  drain_acks();
  gateway_.set_live_tracks(pipeline.tracker().live_count());

  m.trace_id = options_.trace_id ? *options_.trace_id : (ingest_error.empty() ? source.trace_id() : std::string());
  if (output && !options_.trace_id) *output << output_header_line(m.trace_id, cfg_.pipeline.stream_id) << '\n';
  if (output) output->flush();
  m.error = !stage_error.empty() ? stage_error : ingest_error;

  if (options_.linger.count() > 0) std::this_thread::sleep_for(options_.linger);
  m.events_published = hub_.published_count();
  m.overflow_disconnects = hub_.overflow_disconnects();
  m.wall_ms = ms_between(started, Clock::now());
  return m;
}

}  // namespace tollplaza
