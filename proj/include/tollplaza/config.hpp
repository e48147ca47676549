#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tollplaza/axle_counter.hpp"
#include "tollplaza/plate_ensemble.hpp"
#include "tollplaza/trace_io.hpp"
#include "tollplaza/tracker.hpp"

namespace tollplaza {

struct PipelineConfig {
  int optimal_batch_size = 8;
  int min_batch_size = 1;
  double load_threshold = 0.8;  ///< input queue occupancy fraction
  std::int64_t stale_ttl_ms = 300000;
  double containment_slack = 10.0;
  std::string stream_id = "cam0";
  std::map<std::string, std::int64_t> rate_table;  ///< vehicle class -> toll in minor units
};

struct StoreSettings {
  std::string archive_path = "tollplaza-archive.jsonl";
  std::int64_t archive_age_ms = 24LL * 3600 * 1000;
  std::int64_t delete_age_ms = 7LL * 24 * 3600 * 1000;
  std::int64_t cleanup_interval_ms = 60000;
};

struct GatewaySettings {
  std::size_t client_buffer = 1000;
  std::size_t default_window = 50;
  int stats_interval_frames = 30;
};

/// Everything the run command needs, loaded from one JSON document. Missing
/// keys keep their defaults.
struct AppConfig {
  TrackerConfig tracker;
  EngineWeightConfig ensemble;
  AxleConfig axles;
  std::vector<PlateFormat> plate_formats = default_plate_formats();
  std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  VehicleClassTable class_table = default_class_table();
  PipelineConfig pipeline;
  StoreSettings store;
  GatewaySettings gateway;

  AppConfig();

  /// Checks every section, including rate coverage of each class label.
  void validate() const;
};

std::map<std::string, std::int64_t> default_rate_table();

AppConfig config_from_json(const Json& doc);
Json config_to_json(const AppConfig& cfg);
AppConfig load_config(const std::filesystem::path& path);

}  // namespace tollplaza
