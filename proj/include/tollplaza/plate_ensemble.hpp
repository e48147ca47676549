#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tollplaza/geometry.hpp"

namespace tollplaza {

enum class PlateStatus { Scanning, Locked, ManuallyCorrected };

std::string_view to_string(PlateStatus status);
std::optional<PlateStatus> plate_status_from_string(std::string_view name);

enum class SlotClass { Letter, Digit, Either, Fixed };

struct PlateSlot {
  SlotClass cls = SlotClass::Either;
  char fixed = '\0';  ///< only for SlotClass::Fixed
  friend bool operator==(const PlateSlot&, const PlateSlot&) = default;
};

/// Positional plate layout. Pattern strings use L (letter), D (digit),
/// X (either) and a quoted literal such as 'T' for a fixed character;
/// '-' and ' ' are spacing and ignored. "LLL-DDDD" and "LLLDDDD" are the same.
struct PlateFormat {
  std::string format_id;
  std::vector<PlateSlot> slots;
  std::string region_label;

  /// Throws ValidationError on an unknown token or a slot count outside [2,10].
  static PlateFormat parse(std::string_view pattern, std::string format_id = {}, std::string region_label = {});

  bool matches(std::string_view text) const noexcept;
  std::string pattern() const;
};

/// First format whose slots all match positionally, or nullptr.
const PlateFormat* validate_format(std::string_view text, std::span<const PlateFormat> formats) noexcept;

struct EngineWeightConfig {
  double w_engine_confidence = 0.5;
  double w_format = 0.2;
  double w_history = 0.1;
  double w_frame_consistency = 0.2;
  double lock_threshold = 0.85;
  int min_frames_for_lock = 2;
  double agreement_bonus = 0.05;  ///< per extra engine agreeing within one frame
  int consensus_window = 10;      ///< recent read frames used for frame consistency

  void validate() const;  // throws ValidationError
};

/// Text -> number of raw reads seen for one track.
using PlateFrequency = std::map<std::string, int>;

/// history_support: count(text) / max count in `history`, 0 for an empty table.
double history_support(std::string_view text, const PlateFrequency& history) noexcept;

/// Linear four-term score clamped to [0,1]. Throws std::invalid_argument on empty text.
double read_score(const RawPlateRead& read, std::span<const PlateFormat> formats, const PlateFrequency& history,
                  double frame_consensus, const EngineWeightConfig& cfg);

struct FrameFusion {
  std::string text;
  double score = 0.0;
  friend bool operator==(const FrameFusion&, const FrameFusion&) = default;
};

struct ContributingRead {
  std::int64_t frame_index = 0;
  std::string engine_id;
  std::string text;
  double mean_confidence = 0.0;
  friend bool operator==(const ContributingRead&, const ContributingRead&) = default;
};

struct TextSupport {
  double score_sum = 0.0;
  int frames = 0;
  friend bool operator==(const TextSupport&, const TextSupport&) = default;
};

struct PlateConsensus {
  std::uint64_t track_id = 0;
  std::string text;
  double fused_confidence = 0.0;
  PlateStatus status = PlateStatus::Scanning;
  std::vector<ContributingRead> contributing_reads;
  std::optional<std::string> format_id;

  // Running evidence behind the fused value.
  std::map<std::string, TextSupport> per_text;
  int read_frames = 0;                   ///< frames carrying at least one usable read
  std::vector<std::string> recent_best;  ///< winning text of the latest read frames, oldest first
  PlateFrequency read_frequency;         ///< every raw read seen, all engines

  friend bool operator==(const PlateConsensus&, const PlateConsensus&) = default;
};

/// Fraction of `recent_best` equal to `text`; 1 when there are no prior frames.
double frame_consensus(std::string_view text, std::span<const std::string> recent_best) noexcept;

/// Best text for one frame across engines, or nullopt when no read has text.
/// Every read's frame consistency and history support come from `consensus`.
std::optional<FrameFusion> fuse_frame(std::span<const RawPlateRead> reads, const PlateConsensus& consensus,
                                      std::span<const PlateFormat> formats, const EngineWeightConfig& cfg);

struct PlateObservation {
  std::int64_t frame_index = 0;
  std::vector<RawPlateRead> reads;
  std::optional<FrameFusion> fusion;  ///< nullopt for a no-read frame
};

/// Folds one frame into the consensus. Locked never returns to Scanning and
/// keeps its text. Throws StateError once ManuallyCorrected.
PlateConsensus update_consensus(PlateConsensus consensus, const PlateObservation& observation,
                                std::span<const PlateFormat> formats, const EngineWeightConfig& cfg);

/// Operator override. Terminal: further updates are rejected.
PlateConsensus apply_manual_correction(PlateConsensus consensus, std::string corrected_text);

std::vector<PlateFormat> default_plate_formats();

}  // namespace tollplaza
