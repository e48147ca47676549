#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tollplaza/geometry.hpp"

namespace tollplaza {

using Json = nlohmann::json;

/// Reals are written rounded to six decimal places.
double round6(double value) noexcept;

Json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const Json& value);

Json frame_to_json(const FrameDetections& frame);
FrameDetections frame_from_json(const Json& value, const Alphabet& alphabet = Alphabet{});

/// One trace line (no trailing newline).
std::string serialize_frame(const FrameDetections& frame);
FrameDetections parse_frame(std::string_view line, const Alphabet& alphabet = Alphabet{});

/// 64-bit FNV-1a, chained through `seed`.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex_id(std::uint64_t value);

/// Streams frames from a line-delimited trace and fingerprints the bytes read,
/// so pipeline output and simulator ground truth can be matched up.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in, Alphabet alphabet = Alphabet{});

  std::optional<FrameDetections> next();
  std::string trace_id() const { return hex_id(hash_); }
  std::size_t lines_read() const noexcept { return lines_; }

 private:
  std::istream& in_;
  Alphabet alphabet_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::size_t lines_ = 0;
};

std::vector<FrameDetections> read_trace_file(const std::filesystem::path& path,
                                             const Alphabet& alphabet = Alphabet{});

/// Writes the trace and returns its trace id.
std::string write_trace_file(const std::filesystem::path& path,
                             const std::vector<FrameDetections>& frames);

/// Fingerprint of an in-memory trace, identical to what TraceReader computes
/// for the file `write_trace_file` would produce.
std::string trace_id_of(const std::vector<FrameDetections>& frames);

}  // namespace tollplaza
