#include "tollplaza/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>

#include "tollplaza/errors.hpp"

namespace tollplaza {

double round6(double value) noexcept {
  const double r = std::round(value * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no negative zero on the wire
}

Json box_to_json(const BoundingBox& box) {
  return Json::array({round6(box.x_min), round6(box.y_min), round6(box.x_max), round6(box.y_max)});
}

BoundingBox box_from_json(const Json& value) {
  if (!value.is_array() || value.size() != 4) throw FormatError("box must be [x_min,y_min,x_max,y_max]");
  for (const auto& v : value) {
    if (!v.is_number()) throw FormatError("box coordinates must be numbers");
  }
  BoundingBox box{value[0].get<double>(), value[1].get<double>(), value[2].get<double>(),
                  value[3].get<double>()};
  if (!box.valid()) throw FormatError("box has min > max");
  return box;
}

namespace {

Json read_to_json(const RawPlateRead& read) {
  Json confs = Json::array();
  for (double c : read.char_confidences) confs.push_back(round6(c));
  return Json{{"engine_id", read.engine_id}, {"text", read.text}, {"char_confidences", confs}};
}

RawPlateRead read_from_json(const Json& value, const Alphabet& alphabet) {
  RawPlateRead read;
  read.engine_id = value.at("engine_id").get<std::string>();
  read.text = value.at("text").get<std::string>();
  read.char_confidences = value.at("char_confidences").get<std::vector<double>>();
  if (read.char_confidences.size() != read.text.size()) {
    throw FormatError("raw read '" + read.text + "': char_confidences length differs from text length");
  }
  if (!alphabet.accepts(read.text)) {
    throw FormatError("raw read '" + read.text + "' has characters outside the alphabet");
  }
  for (double c : read.char_confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw FormatError("char confidence outside [0,1]");
  }
  return read;
}

}  // namespace

Json frame_to_json(const FrameDetections& frame) {
  Json dets = Json::array();
  for (const auto& det : frame.detections) {
    Json reads = Json::array();
    for (const auto& r : det.raw_reads) reads.push_back(read_to_json(r));
    dets.push_back(Json{{"class", std::string(to_string(det.cls))},
                        {"confidence", round6(det.confidence)},
                        {"box", box_to_json(det.box)},
                        {"raw_reads", reads}});
  }
  return Json{{"frame_index", frame.frame_index},
              {"timestamp_ms", frame.timestamp_ms},
              {"detections", dets}};
}

FrameDetections frame_from_json(const Json& value, const Alphabet& alphabet) {
  try {
    FrameDetections frame;
    frame.frame_index = value.at("frame_index").get<std::int64_t>();
    frame.timestamp_ms = value.at("timestamp_ms").get<std::int64_t>();
    if (frame.frame_index < 0) throw FormatError("negative frame_index");
    for (const auto& d : value.at("detections")) {
      Detection det;
      const auto cls_name = d.at("class").get<std::string>();
      const auto cls = detection_class_from_string(cls_name);
      if (!cls) throw FormatError("unknown detection class '" + cls_name + "'");
      det.cls = *cls;
      det.confidence = d.at("confidence").get<double>();
      if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
        throw FormatError("detection confidence outside [0,1]");
      }
      det.box = box_from_json(d.at("box"));
      if (d.contains("raw_reads")) {
        for (const auto& r : d.at("raw_reads")) det.raw_reads.push_back(read_from_json(r, alphabet));
      }
      if (!det.raw_reads.empty() && det.cls != DetectionClass::LicensePlate) {
        throw FormatError("raw_reads present on a non-plate detection");
      }
      frame.detections.push_back(std::move(det));
    }
    return frame;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed frame record: ") + e.what());
  }
}

std::string serialize_frame(const FrameDetections& frame) { return frame_to_json(frame).dump(); }

FrameDetections parse_frame(std::string_view line, const Alphabet& alphabet) {
  Json value;
  try {
    value = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("trace line is not valid JSON: ") + e.what());
  }
  return frame_from_json(value, alphabet);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_id(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

TraceReader::TraceReader(std::istream& in, Alphabet alphabet) : in_(in), alphabet_(std::move(alphabet)) {}

std::optional<FrameDetections> TraceReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++lines_;
    hash_ = fnv1a(line, hash_);
    hash_ = fnv1a("\n", hash_);
    try {
      return parse_frame(line, alphabet_);
    } catch (const FormatError& e) {
      throw FormatError("trace line " + std::to_string(lines_) + ": " + e.what());
    }
  }
  return std::nullopt;
}

std::vector<FrameDetections> read_trace_file(const std::filesystem::path& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open trace file " + path.string());
  TraceReader reader(in, alphabet);
  std::vector<FrameDetections> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::string write_trace_file(const std::filesystem::path& path, const std::vector<FrameDetections>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write trace file " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : frames) {
    const auto line = serialize_frame(f);
    out << line << '\n';
    h = fnv1a(line, h);
    h = fnv1a("\n", h);
  }
  if (!out) throw FormatError("failed writing trace file " + path.string());
  return hex_id(h);
}

std::string trace_id_of(const std::vector<FrameDetections>& frames) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : frames) {
    h = fnv1a(serialize_frame(f), h);
    h = fnv1a("\n", h);
  }
  return hex_id(h);
}

}  // namespace tollplaza
