#include "tollplaza/plate_ensemble.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tollplaza/errors.hpp"

namespace tollplaza {

std::string_view to_string(PlateStatus status) {
  switch (status) {
    case PlateStatus::Scanning: return "Scanning";
    case PlateStatus::Locked: return "Locked";
    case PlateStatus::ManuallyCorrected: return "ManuallyCorrected";
  }
  return "Scanning";
}

std::optional<PlateStatus> plate_status_from_string(std::string_view name) {
  for (auto s : {PlateStatus::Scanning, PlateStatus::Locked, PlateStatus::ManuallyCorrected}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

PlateFormat PlateFormat::parse(std::string_view pattern, std::string format_id, std::string region_label) {
  PlateFormat fmt;
  fmt.format_id = format_id.empty() ? std::string(pattern) : std::move(format_id);
  fmt.region_label = std::move(region_label);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    switch (c) {
      case 'L': fmt.slots.push_back({SlotClass::Letter}); break;
      case 'D': fmt.slots.push_back({SlotClass::Digit}); break;
      case 'X': fmt.slots.push_back({SlotClass::Either}); break;
      case '-':
      case ' ': break;
      case '\'':
        if (i + 2 >= pattern.size() || pattern[i + 2] != '\'') {
          throw ValidationError("plate format '" + std::string(pattern) + "': unterminated literal");
        }
        fmt.slots.push_back({SlotClass::Fixed, pattern[i + 1]});
        i += 2;
        break;
      default:
        throw ValidationError("plate format '" + std::string(pattern) + "': unknown slot '" + std::string(1, c) + "'");
    }
  }
  if (fmt.slots.size() < 2 || fmt.slots.size() > 10) {
    throw ValidationError("plate format '" + std::string(pattern) + "' must have 2 to 10 slots");
  }
  return fmt;
}

bool PlateFormat::matches(std::string_view text) const noexcept {
  if (text.size() != slots.size()) return false;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    switch (slots[i].cls) {
      case SlotClass::Letter:
        if (!(c >= 'A' && c <= 'Z')) return false;
        break;
      case SlotClass::Digit:
        if (!std::isdigit(c)) return false;
        break;
      case SlotClass::Either:
        if (!((c >= 'A' && c <= 'Z') || std::isdigit(c))) return false;
        break;
      case SlotClass::Fixed:
        if (text[i] != slots[i].fixed) return false;
        break;
    }
  }
  return true;
}

std::string PlateFormat::pattern() const {
  std::string out;
  for (const auto& s : slots) {
    switch (s.cls) {
      case SlotClass::Letter: out += 'L'; break;
      case SlotClass::Digit: out += 'D'; break;
      case SlotClass::Either: out += 'X'; break;
      case SlotClass::Fixed: out += '\''; out += s.fixed; out += '\''; break;
    }
  }
  return out;
}

const PlateFormat* validate_format(std::string_view text, std::span<const PlateFormat> formats) noexcept {
  for (const auto& f : formats) {
    if (f.matches(text)) return &f;
  }
  return nullptr;
}

std::vector<PlateFormat> default_plate_formats() {
  return {PlateFormat::parse("LLLDDDD", "LLL-DDDD"), PlateFormat::parse("LLDDDD", "LL-DDDD")};
}

void EngineWeightConfig::validate() const {
  const double ws[] = {w_engine_confidence, w_format, w_history, w_frame_consistency};
  double sum = 0.0;
  for (double w : ws) {
    if (w < 0.0) throw ValidationError("ensemble weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("ensemble weights must sum to 1");
  if (!(lock_threshold > 0.0 && lock_threshold < 1.0)) throw ValidationError("lock_threshold must be in (0,1)");
  if (min_frames_for_lock < 1) throw ValidationError("min_frames_for_lock must be >= 1");
  if (agreement_bonus < 0.0) throw ValidationError("agreement_bonus must be nonnegative");
  if (consensus_window < 1) throw ValidationError("consensus_window must be >= 1");
}

double history_support(std::string_view text, const PlateFrequency& history) noexcept {
  int max_count = 0;
  for (const auto& [t, n] : history) max_count = std::max(max_count, n);
  if (max_count == 0) return 0.0;
  auto it = history.find(std::string(text));
  return it == history.end() ? 0.0 : static_cast<double>(it->second) / max_count;
}

double read_score(const RawPlateRead& read, std::span<const PlateFormat> formats, const PlateFrequency& history,
                  double frame_consensus_value, const EngineWeightConfig& cfg) {
  if (read.text.empty()) throw std::invalid_argument("read_score: empty plate text");
  const double format_validity = validate_format(read.text, formats) ? 1.0 : 0.0;
  const double score = cfg.w_engine_confidence * read.mean_confidence() + cfg.w_format * format_validity +
                       cfg.w_history * history_support(read.text, history) +
                       cfg.w_frame_consistency * frame_consensus_value;
  return std::clamp(score, 0.0, 1.0);
}

double frame_consensus(std::string_view text, std::span<const std::string> recent_best) noexcept {
  if (recent_best.empty()) return 1.0;
  const auto agree = std::count(recent_best.begin(), recent_best.end(), text);
  return static_cast<double>(agree) / static_cast<double>(recent_best.size());
}

std::optional<FrameFusion> fuse_frame(std::span<const RawPlateRead> reads, const PlateConsensus& consensus,
                                      std::span<const PlateFormat> formats, const EngineWeightConfig& cfg) {
  struct Group {
    double best = 0.0;
    std::set<std::string> engines;
  };
  std::map<std::string, Group> groups;
  for (const auto& r : reads) {
    if (r.text.empty()) continue;
    const double s = read_score(r, formats, consensus.read_frequency,
                                frame_consensus(r.text, consensus.recent_best), cfg);
    auto& g = groups[r.text];
    g.best = std::max(g.best, s);
    g.engines.insert(r.engine_id);
  }
  if (groups.empty()) return std::nullopt;

  std::optional<FrameFusion> best;
  for (const auto& [text, g] : groups) {  // ascending text: strict > keeps the lexicographically first on ties
    const double boosted =
        std::min(1.0, g.best + cfg.agreement_bonus * static_cast<double>(g.engines.size() - 1));
    if (!best || boosted > best->score) best = FrameFusion{text, boosted};
  }
  return best;
}

namespace {

struct Leader {
  std::string text;
  double value = -1.0;
  int frames = 0;
};

Leader leading_text(const PlateConsensus& c) {
  int max_frames = 0;
  for (const auto& [t, s] : c.per_text) max_frames = std::max(max_frames, s.frames);
  Leader lead;
  for (const auto& [t, s] : c.per_text) {
    const double mean = s.score_sum / s.frames;
    double support = static_cast<double>(s.frames) / c.read_frames;
    if (s.frames == max_frames) support = std::max(support, 0.5);
    const double value = std::clamp(mean * support, 0.0, 1.0);
    if (value > lead.value) lead = {t, value, s.frames};
  }
  return lead;
}

double value_for(const PlateConsensus& c, const std::string& text) {
  auto it = c.per_text.find(text);
  if (it == c.per_text.end() || c.read_frames == 0) return 0.0;
  int max_frames = 0;
  for (const auto& [t, s] : c.per_text) max_frames = std::max(max_frames, s.frames);
  double support = static_cast<double>(it->second.frames) / c.read_frames;
  if (it->second.frames == max_frames) support = std::max(support, 0.5);
  return std::clamp(it->second.score_sum / it->second.frames * support, 0.0, 1.0);
}

}  // namespace

PlateConsensus update_consensus(PlateConsensus c, const PlateObservation& obs, std::span<const PlateFormat> formats,
                                const EngineWeightConfig& cfg) {
  if (c.status == PlateStatus::ManuallyCorrected) {
    throw StateError("plate consensus for track " + std::to_string(c.track_id) + " was manually corrected");
  }
  for (const auto& r : obs.reads) {
    if (r.text.empty()) continue;
    c.contributing_reads.push_back({obs.frame_index, r.engine_id, r.text, r.mean_confidence()});
    c.read_frequency[r.text] += 1;
  }
  if (!obs.fusion) return c;  // no-read frames never count toward a lock

  auto& support = c.per_text[obs.fusion->text];
  support.score_sum += obs.fusion->score;
  support.frames += 1;
  c.read_frames += 1;
  c.recent_best.push_back(obs.fusion->text);
  if (c.recent_best.size() > static_cast<std::size_t>(cfg.consensus_window)) {
    c.recent_best.erase(c.recent_best.begin());
  }

  if (c.status == PlateStatus::Locked) {
    c.fused_confidence = std::max(c.fused_confidence, value_for(c, c.text));
    return c;
  }

  const Leader lead = leading_text(c);
  c.text = lead.text;
  c.fused_confidence = lead.value;
  const PlateFormat* fmt = validate_format(c.text, formats);
  c.format_id = fmt ? std::optional<std::string>(fmt->format_id) : std::nullopt;
  if (lead.value >= cfg.lock_threshold && lead.frames >= cfg.min_frames_for_lock) c.status = PlateStatus::Locked;
  return c;
}

PlateConsensus apply_manual_correction(PlateConsensus c, std::string corrected_text) {
  c.text = std::move(corrected_text);
  c.status = PlateStatus::ManuallyCorrected;
  return c;
}

}  // namespace tollplaza
