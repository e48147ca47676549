#include "tollplaza/config.hpp"

#include <fstream>

#include "tollplaza/errors.hpp"

namespace tollplaza {

std::map<std::string, std::int64_t> default_rate_table() {
  return {{"Class-2 (car/light)", 200},
          {"Class-3 (medium)", 400},
          {"Class-4 (truck)", 600},
          {"Class-5 (heavy truck)", 900},
          {std::string(kUnclassified), 200}};
}

AppConfig::AppConfig() { pipeline.rate_table = default_rate_table(); }

void AppConfig::validate() const {
  tracker.validate();
  ensemble.validate();
  if (pipeline.min_batch_size < 1 || pipeline.optimal_batch_size < pipeline.min_batch_size) {
    throw ValidationError("pipeline: require 1 <= min_batch_size <= optimal_batch_size");
  }
  if (!(pipeline.load_threshold > 0.0 && pipeline.load_threshold <= 1.0)) {
    throw ValidationError("pipeline.load_threshold must be in (0,1]");
  }
  if (pipeline.stale_ttl_ms <= 0) throw ValidationError("pipeline.stale_ttl_ms must be positive");
  if (pipeline.containment_slack < 0.0) throw ValidationError("pipeline.containment_slack must be >= 0");
  if (!pipeline.rate_table.count(std::string(kUnclassified))) {
    throw ValidationError("rate_table has no entry for Unclassified");
  }
  for (const auto& [count, label] : class_table) {
    if (!pipeline.rate_table.count(label)) throw ValidationError("rate_table has no entry for class '" + label + "'");
  }
  if (axles.temporal_window < 1) throw ValidationError("axles.temporal_window must be >= 1");
  if (!(axles.merge_factor > 0.0)) throw ValidationError("axles.merge_factor must be positive");
  if (store.archive_age_ms >= store.delete_age_ms) {
    throw ValidationError("store: archive_age_ms must be below delete_age_ms");
  }
  if (gateway.client_buffer == 0) throw ValidationError("gateway.client_buffer must be positive");
  if (plate_formats.empty()) throw ValidationError("at least one plate format is required");
}

namespace {

template <typename T>
void read_opt(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

AppConfig config_from_json(const Json& doc) {
  AppConfig cfg;
  try {
    if (doc.contains("tracker")) {
      const auto& t = doc.at("tracker");
      read_opt(t, "iou_match_threshold", cfg.tracker.iou_match_threshold);
      read_opt(t, "activation_hits", cfg.tracker.activation_hits);
      read_opt(t, "occlusion_patience_frames", cfg.tracker.occlusion_patience_frames);
      read_opt(t, "tentative_patience_frames", cfg.tracker.tentative_patience_frames);
      read_opt(t, "velocity_smoothing", cfg.tracker.velocity_smoothing);
      read_opt(t, "duplicate_iou", cfg.tracker.duplicate_iou);
    }
    if (doc.contains("ensemble")) {
      const auto& e = doc.at("ensemble");
      read_opt(e, "w_engine_confidence", cfg.ensemble.w_engine_confidence);
      read_opt(e, "w_format", cfg.ensemble.w_format);
      read_opt(e, "w_history", cfg.ensemble.w_history);
      read_opt(e, "w_frame_consistency", cfg.ensemble.w_frame_consistency);
      read_opt(e, "lock_threshold", cfg.ensemble.lock_threshold);
      read_opt(e, "min_frames_for_lock", cfg.ensemble.min_frames_for_lock);
      read_opt(e, "agreement_bonus", cfg.ensemble.agreement_bonus);
      read_opt(e, "consensus_window", cfg.ensemble.consensus_window);
    }
    if (doc.contains("axles")) {
      const auto& a = doc.at("axles");
      read_opt(a, "merge_factor", cfg.axles.merge_factor);
      read_opt(a, "plausible_min", cfg.axles.plausible_min);
      read_opt(a, "plausible_max", cfg.axles.plausible_max);
      read_opt(a, "implausible_penalty", cfg.axles.implausible_penalty);
      read_opt(a, "temporal_window", cfg.axles.temporal_window);
      read_opt(a, "slack", cfg.axles.slack);
    }
    if (doc.contains("plate_formats")) {
      cfg.plate_formats.clear();
      for (const auto& f : doc.at("plate_formats")) {
        if (f.is_string()) {
          cfg.plate_formats.push_back(PlateFormat::parse(f.get<std::string>()));
        } else {
          cfg.plate_formats.push_back(PlateFormat::parse(f.at("pattern").get<std::string>(),
                                                         f.value("format_id", std::string{}),
                                                         f.value("region_label", std::string{})));
        }
      }
    }
    read_opt(doc, "alphabet", cfg.alphabet);
    if (doc.contains("class_table")) {
      cfg.class_table.clear();
      for (const auto& [k, v] : doc.at("class_table").items()) cfg.class_table[std::stoi(k)] = v.get<std::string>();
    }
    if (doc.contains("pipeline")) {
      const auto& p = doc.at("pipeline");
      read_opt(p, "optimal_batch_size", cfg.pipeline.optimal_batch_size);
      read_opt(p, "min_batch_size", cfg.pipeline.min_batch_size);
      read_opt(p, "load_threshold", cfg.pipeline.load_threshold);
      read_opt(p, "stale_ttl_ms", cfg.pipeline.stale_ttl_ms);
      read_opt(p, "containment_slack", cfg.pipeline.containment_slack);
      read_opt(p, "stream_id", cfg.pipeline.stream_id);
    }
    if (doc.contains("rate_table")) {
      cfg.pipeline.rate_table.clear();
      for (const auto& [k, v] : doc.at("rate_table").items()) cfg.pipeline.rate_table[k] = v.get<std::int64_t>();
    }
    if (doc.contains("store")) {
      const auto& s = doc.at("store");
      read_opt(s, "archive_path", cfg.store.archive_path);
      read_opt(s, "archive_age_ms", cfg.store.archive_age_ms);
      read_opt(s, "delete_age_ms", cfg.store.delete_age_ms);
      read_opt(s, "cleanup_interval_ms", cfg.store.cleanup_interval_ms);
    }
    if (doc.contains("gateway")) {
      const auto& g = doc.at("gateway");
      read_opt(g, "client_buffer", cfg.gateway.client_buffer);
      read_opt(g, "default_window", cfg.gateway.default_window);
      read_opt(g, "stats_interval_frames", cfg.gateway.stats_interval_frames);
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Json config_to_json(const AppConfig& cfg) {
  Json formats = Json::array();
  for (const auto& f : cfg.plate_formats) {
    formats.push_back(Json{{"pattern", f.pattern()}, {"format_id", f.format_id}, {"region_label", f.region_label}});
  }
  Json classes = Json::object();
  for (const auto& [k, v] : cfg.class_table) classes[std::to_string(k)] = v;
  Json rates = Json::object();
  for (const auto& [k, v] : cfg.pipeline.rate_table) rates[k] = v;
  return Json{
      {"tracker",
       {{"iou_match_threshold", cfg.tracker.iou_match_threshold},
        {"activation_hits", cfg.tracker.activation_hits},
        {"occlusion_patience_frames", cfg.tracker.occlusion_patience_frames},
        {"tentative_patience_frames", cfg.tracker.tentative_patience_frames},
        {"velocity_smoothing", cfg.tracker.velocity_smoothing},
        {"duplicate_iou", cfg.tracker.duplicate_iou}}},
      {"ensemble",
       {{"w_engine_confidence", cfg.ensemble.w_engine_confidence},
        {"w_format", cfg.ensemble.w_format},
        {"w_history", cfg.ensemble.w_history},
        {"w_frame_consistency", cfg.ensemble.w_frame_consistency},
        {"lock_threshold", cfg.ensemble.lock_threshold},
        {"min_frames_for_lock", cfg.ensemble.min_frames_for_lock},
        {"agreement_bonus", cfg.ensemble.agreement_bonus},
        {"consensus_window", cfg.ensemble.consensus_window}}},
      {"axles",
       {{"merge_factor", cfg.axles.merge_factor},
        {"plausible_min", cfg.axles.plausible_min},
        {"plausible_max", cfg.axles.plausible_max},
        {"implausible_penalty", cfg.axles.implausible_penalty},
        {"temporal_window", cfg.axles.temporal_window},
        {"slack", cfg.axles.slack}}},
      {"plate_formats", formats},
      {"alphabet", cfg.alphabet},
      {"class_table", classes},
      {"pipeline",
       {{"optimal_batch_size", cfg.pipeline.optimal_batch_size},
        {"min_batch_size", cfg.pipeline.min_batch_size},
        {"load_threshold", cfg.pipeline.load_threshold},
        {"stale_ttl_ms", cfg.pipeline.stale_ttl_ms},
        {"containment_slack", cfg.pipeline.containment_slack},
        {"stream_id", cfg.pipeline.stream_id}}},
      {"rate_table", rates},
      {"store",
       {{"archive_path", cfg.store.archive_path},
        {"archive_age_ms", cfg.store.archive_age_ms},
        {"delete_age_ms", cfg.store.delete_age_ms},
        {"cleanup_interval_ms", cfg.store.cleanup_interval_ms}}},
      {"gateway",
       {{"client_buffer", cfg.gateway.client_buffer},
        {"default_window", cfg.gateway.default_window},
        {"stats_interval_frames", cfg.gateway.stats_interval_frames}}}};
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace tollplaza
