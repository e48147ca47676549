#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "tollplaza/config.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/evaluation.hpp"
#include "tollplaza/http_gateway.hpp"
#include "tollplaza/remote_store.hpp"
#include "tollplaza/resp.hpp"
#include "tollplaza/runner.hpp"
#include "tollplaza/traffic_sim.hpp"

using namespace tollplaza;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string fingerprint_file(const std::filesystem::path& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  TraceReader reader(in, alphabet);
  while (reader.next()) {
  }
  return reader.trace_id();
}

struct RunArgs {
  std::string trace;
  std::string live;
  std::string config;
  std::string store = "embedded";
  std::string gateway_bind;
  std::string metrics_out;
  std::string output;
  int linger_ms = 0;
  std::size_t queue = 64;
};

int cmd_run(const RunArgs& a) {
  AppConfig cfg = a.config.empty() ? AppConfig{} : load_config(a.config);
  cfg.validate();
  const Alphabet alphabet(cfg.alphabet);

  RunnerOptions opts;
  opts.queue_capacity = a.queue;
  opts.linger = std::chrono::milliseconds(a.linger_ms);
  if (!a.trace.empty()) opts.trace_id = fingerprint_file(a.trace, alphabet);

  auto archive = std::make_shared<FileArchiveSink>(cfg.store.archive_path);
  PipelineRunner runner(cfg, open_store(a.store, archive), opts);

  std::unique_ptr<HttpGatewayServer> server;
  if (!a.gateway_bind.empty()) {
    server = std::make_unique<HttpGatewayServer>(runner.gateway(), runner.hub(), a.gateway_bind);
    std::cerr << "gateway listening on port " << server->port() << '\n';
  }

  std::ofstream out_file;
  std::ostream* out = nullptr;
  if (!a.output.empty()) {
    out_file.open(a.output);
    if (!out_file) throw std::runtime_error("cannot write " + a.output);
    out = &out_file;
  }

  std::ifstream trace_in;
  std::istream* in = &std::cin;
  const std::string src = !a.trace.empty() ? a.trace : a.live;
  if (src != "-") {
    trace_in.open(src);
    if (!trace_in) throw std::runtime_error("cannot open " + src);
    in = &trace_in;
  }

  const auto m = runner.run(stream_source(*in, alphabet), out);
  if (server) server->stop();
  if (!a.metrics_out.empty()) write_json(a.metrics_out, metrics_to_json(m));
  std::cerr << "frames " << m.frames << ", transactions " << m.transactions << ", persisted " << m.persisted
            << ", core p50 " << summarize(m.core_ms).p50 << " ms\n";
  if (!m.error.empty()) {
    std::cerr << "error: " << m.error << '\n';
    return 2;
  }
  return m.store_failures ? 3 : 0;
}

int cmd_generate(const std::string& spec_path, const std::string& out, const std::string& truth_path) {
  const auto spec = load_scenario(spec_path);
  const auto sc = generate(spec);
  const auto id = write_trace_file(out, sc.frames);
  auto truth = sc.truth;
  truth.trace_id = id;
  save_truth(truth_path, truth);
  std::cerr << "frames " << sc.frames.size() << ", vehicles " << truth.vehicles.size() << ", trace " << id << '\n';
  return 0;
}

int cmd_evaluate(const std::string& output, const std::string& truth, const std::string& report) {
  const auto r = evaluate(load_pipeline_output(output), load_truth(truth));
  const auto doc = report_to_json(r);
  if (report.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json(report, doc);
  }
  return 0;
}

int cmd_kv_serve(const std::string& bind) {
  const auto [host, port] = parse_host_port(bind);
  RespServer server(host, port);
  std::cerr << "kv store listening on port " << server.port() << '\n';
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toll plaza perception pipeline"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Process a detection trace or live stream");
  auto* trace_opt = run_cmd->add_option("--trace", run.trace, "Recorded trace file");
  auto* live_opt = run_cmd->add_option("--live", run.live, "Live line stream (path, fifo, or - for stdin)");
  trace_opt->excludes(live_opt);
  run_cmd->add_option("--config", run.config, "Configuration document");
  run_cmd->add_option("--store", run.store, "embedded, or host:port of a key-value service");
  run_cmd->add_option("--gateway-bind", run.gateway_bind, "host:port for the HTTP/WebSocket gateway");
  run_cmd->add_option("--metrics-out", run.metrics_out, "Write run metrics here");
  run_cmd->add_option("--output", run.output, "Write pipeline output records here");
  run_cmd->add_option("--linger-ms", run.linger_ms, "Keep the gateway up this long after the stream ends");
  run_cmd->add_option("--queue", run.queue, "Input queue capacity in frames");

  auto* sim = app.add_subcommand("sim", "Scenario simulator and evaluator");
  sim->require_subcommand(1);
  std::string spec, out, truth, trace_output, report;
  auto* gen = sim->add_subcommand("generate", "Generate a trace and its ground truth");
  gen->add_option("--spec", spec, "Scenario document")->required();
  gen->add_option("--out", out, "Trace file to write")->required();
  gen->add_option("--truth", truth, "Ground truth file to write")->required();
  auto* ev = sim->add_subcommand("evaluate", "Score pipeline output against ground truth");
  ev->add_option("--trace-output", trace_output, "Pipeline output records")->required();
  ev->add_option("--truth", truth, "Ground truth file")->required();
  ev->add_option("--report", report, "Report file (stdout when omitted)");

  std::string bind = "127.0.0.1:6379";
  auto* kv = app.add_subcommand("kv-serve", "Serve the key-value protocol used by --store");
  kv->add_option("--bind", bind, "host:port");

  auto* cfg_cmd = app.add_subcommand("config", "Print the default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (run.trace.empty() && run.live.empty()) throw ValidationError("run needs --trace or --live");
      return cmd_run(run);
    }
    if (*gen) return cmd_generate(spec, out, truth);
    if (*ev) return cmd_evaluate(trace_output, truth, report);
    if (*kv) return cmd_kv_serve(bind);
    if (*cfg_cmd) {
      std::cout << config_to_json(AppConfig{}).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
