#include "tollplaza/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "tollplaza/errors.hpp"
#include "tollplaza/plate_ensemble.hpp"

namespace tollplaza {

namespace {

constexpr double kHeadwayPx = 60.0;
constexpr double kPlateW = 80.0;
constexpr double kPlateH = 26.0;

// Portable draws: std distributions are implementation-defined, the engine is not.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * n)); }
  std::uint64_t raw() { return gen_(); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::string_view kLetters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
constexpr std::string_view kDigits = "0123456789";
constexpr std::string_view kAlnum = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

char confusable(char c) {
  switch (c) {
    case 'O': return '0';
    case '0': return 'O';
    case 'I': return '1';
    case '1': return 'I';
    case 'B': return '8';
    case '8': return 'B';
    case 'S': return '5';
    case '5': return 'S';
    default: return '\0';
  }
}

char uniform_other(char truth, SimRng& rng) {
  const std::size_t t = kAlnum.find(truth);
  std::size_t k = rng.index(kAlnum.size() - 1);
  if (t != std::string_view::npos && k >= t) ++k;  // uniform over the other 35
  return kAlnum[k];
}

// Substitution drawn from the confusion set when the character has a partner,
// uniform otherwise. Consumes exactly two draws.
char substitute(char truth, SimRng& rng) {
  const double u = rng.uniform();
  const char other = uniform_other(truth, rng);
  const char partner = confusable(truth);
  return (partner != '\0' && u < 0.5) ? partner : other;
}

std::string random_plate(const PlateFormat& fmt, SimRng& rng) {
  std::string out;
  for (const auto& slot : fmt.slots) {
    switch (slot.cls) {
      case SlotClass::Letter: out += kLetters[rng.index(kLetters.size())]; break;
      case SlotClass::Digit: out += kDigits[rng.index(kDigits.size())]; break;
      case SlotClass::Either: out += kAlnum[rng.index(kAlnum.size())]; break;
      case SlotClass::Fixed: out += slot.fixed; break;
    }
  }
  return out;
}

std::vector<double> wheel_fractions(int axles) {
  switch (axles) {
    case 1: return {0.5};
    case 2: return {0.15, 0.85};
    case 3: return {0.12, 0.70, 0.86};
    case 4: return {0.10, 0.30, 0.74, 0.88};
    case 5: return {0.08, 0.26, 0.40, 0.78, 0.91};
    case 6: return {0.07, 0.22, 0.35, 0.66, 0.79, 0.92};
    default: {
      std::vector<double> f;
      for (int i = 0; i < axles; ++i) f.push_back(0.07 + 0.86 * i / (axles - 1));
      return f;
    }
  }
}

double vehicle_length(int axles) { return 260.0 + 140.0 * (axles - 2); }
double vehicle_height(int axles) { return 130.0 + 25.0 * std::min(std::max(axles - 2, 0), 3); }
double wheel_size(int axles) { return axles <= 3 ? 44.0 : 48.0; }

struct OcrProfile {
  std::vector<std::vector<bool>> hard;     // [engine][position]
  std::vector<std::vector<char>> partner;  // [engine][position]
};

struct SimVehicle {
  TruthVehicle truth;
  double length = 0.0;
  double height = 0.0;
  double lane_bottom = 0.0;
  std::int64_t occlusion_start = -1;
  OcrProfile ocr;

  double x_min(std::int64_t frame) const { return truth.speed * static_cast<double>(frame - truth.entry_frame); }
  bool visible(std::int64_t frame) const { return frame >= truth.entry_frame && frame <= truth.exit_frame; }
};

struct TrueBoxes {
  BoundingBox vehicle;
  BoundingBox plate;
  std::vector<BoundingBox> wheels;
};

TrueBoxes true_boxes(const SimVehicle& v, std::int64_t frame) {
  TrueBoxes b;
  const double x0 = v.x_min(frame);
  const double x1 = x0 + v.length;
  const double y1 = v.lane_bottom;
  b.vehicle = {x0, y1 - v.height, x1, y1};
  b.plate = {x1 - 110.0, y1 - 95.0, x1 - 110.0 + kPlateW, y1 - 95.0 + kPlateH};
  const double w = wheel_size(v.truth.axles);
  for (double f : wheel_fractions(v.truth.axles)) {
    const double cx = x0 + f * v.length;
    b.wheels.push_back({cx - w / 2.0, y1 - w, cx + w / 2.0, y1});
  }
  return b;
}

BoundingBox jitter(const BoundingBox& b, double sigma, SimRng& rng) {
  double c[4] = {b.x_min + sigma * rng.normal(), b.y_min + sigma * rng.normal(), b.x_max + sigma * rng.normal(),
                 b.y_max + sigma * rng.normal()};
  if (c[0] > c[2]) std::swap(c[0], c[2]);
  if (c[1] > c[3]) std::swap(c[1], c[3]);
  return {c[0], c[1], c[2], c[3]};
}

OcrProfile make_profile(const ScenarioSpec& spec, const std::string& plate, SimRng& rng) {
  OcrProfile p;
  for (std::size_t e = 0; e < spec.engines.size(); ++e) {
    const double err = spec.char_error(e);
    const double q = std::min(1.0, spec.noise.ocr_error_persistence * err / spec.noise.ocr_hard_error);
    std::vector<bool> hard;
    std::vector<char> partner;
    for (char c : plate) {
      const double u = rng.uniform();
      const char alt = confusable(c);
      const char other = uniform_other(c, rng);
      hard.push_back(u < q);
      partner.push_back(alt != '\0' ? alt : other);
    }
    p.hard.push_back(std::move(hard));
    p.partner.push_back(std::move(partner));
  }
  return p;
}

RawPlateRead read_plate(const ScenarioSpec& spec, const SimVehicle& v, std::size_t engine, SimRng& rng) {
  const double err = spec.char_error(engine);
  const double ph = spec.noise.ocr_hard_error;
  const double q = std::min(1.0, spec.noise.ocr_error_persistence * err / ph);
  const double p_easy = q < 1.0 ? std::clamp((1.0 - spec.noise.ocr_error_persistence) * err / (1.0 - q), 0.0, 1.0)
                                : 0.0;
  RawPlateRead read;
  read.engine_id = spec.engines[engine];
  const auto& plate = v.truth.plate;
  for (std::size_t i = 0; i < plate.size(); ++i) {
    const double u = rng.uniform();
    const char sub = substitute(plate[i], rng);
    const double conf_bad = rng.uniform(0.30, 0.75);
    const double conf_good = rng.uniform(0.80, 1.0);
    const bool hard = v.ocr.hard[engine][i];
    const bool wrong = hard ? u < ph : u < p_easy;
    if (!wrong) {
      read.text += plate[i];
      read.char_confidences.push_back(conf_good);
    } else {
      read.text += hard ? v.ocr.partner[engine][i] : sub;
      read.char_confidences.push_back(conf_bad);
    }
  }
  return read;
}

Detection spurious_detection(const ScenarioSpec& spec, const std::vector<PlateFormat>& formats, SimRng& rng) {
  Detection d;
  d.cls = kAllDetectionClasses[rng.index(std::size(kAllDetectionClasses))];
  double w = 0, h = 0;
  switch (d.cls) {
    case DetectionClass::Vehicle: w = rng.uniform(200, 600); h = rng.uniform(120, 200); break;
    case DetectionClass::LicensePlate: w = rng.uniform(60, 100); h = rng.uniform(20, 32); break;
    case DetectionClass::Wheel: w = h = rng.uniform(36, 52); break;
    case DetectionClass::Background: w = rng.uniform(40, 300); h = rng.uniform(40, 300); break;
  }
  const double x = rng.uniform(0, spec.image_width - w);
  const double y = rng.uniform(0, spec.image_height - h);
  d.box = {x, y, x + w, y + h};
  d.confidence = rng.uniform(0.05, 0.45);
  if (d.cls == DetectionClass::LicensePlate) {
    const auto& fmt = formats[rng.index(formats.size())];
    for (const auto& engine : spec.engines) {
      RawPlateRead r;
      r.engine_id = engine;
      r.text = random_plate(fmt, rng);
      for (std::size_t i = 0; i < r.text.size(); ++i) r.char_confidences.push_back(rng.uniform(0.30, 0.75));
      d.raw_reads.push_back(std::move(r));
    }
  }
  return d;
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string("scenario: ") + name + " must be in [0,1]");
}

std::vector<PlateFormat> parse_formats(const std::vector<std::string>& patterns) {
  std::vector<PlateFormat> out;
  for (const auto& p : patterns) out.push_back(PlateFormat::parse(p, p));
  return out;
}

}  // namespace

double ScenarioSpec::char_error(std::size_t engine) const noexcept {
  if (noise.ocr_char_error.empty()) return 0.0;
  if (noise.ocr_char_error.size() == 1) return noise.ocr_char_error.front();
  return engine < noise.ocr_char_error.size() ? noise.ocr_char_error[engine] : 0.0;
}

void ScenarioSpec::validate() const {
  if (duration_frames < 0) throw ValidationError("scenario: duration_frames must be >= 0");
  if (tail_frames < 0) throw ValidationError("scenario: tail_frames must be >= 0");
  if (!(arrival_rate >= 0.0 && arrival_rate <= 100.0)) {
    throw ValidationError("scenario: arrival_rate must be in [0,100] vehicles per 100 frames");
  }
  if (!(fps > 0.0)) throw ValidationError("scenario: fps must be positive");
  if (image_width < 400 || image_height < 200) throw ValidationError("scenario: image too small");
  if (lanes < 1 || image_height / lanes < 220) throw ValidationError("scenario: lanes must fit the image height");
  if (max_concurrent < 1) throw ValidationError("scenario: max_concurrent must be >= 1");
  if (!(speed_min > 0.0 && speed_min <= speed_max)) throw ValidationError("scenario: need 0 < speed_min <= speed_max");
  if (plate_formats.empty()) throw ValidationError("scenario: plate_formats is empty");
  parse_formats(plate_formats);
  if (engines.empty()) throw ValidationError("scenario: at least one engine is required");
  if (std::set<std::string>(engines.begin(), engines.end()).size() != engines.size()) {
    throw ValidationError("scenario: engine ids must be unique");
  }
  double mass = 0.0;
  for (const auto& [axles, w] : axle_mix) {
    if (axles < 1 || vehicle_length(axles) > image_width) throw ValidationError("scenario: axle count out of range");
    if (!(w >= 0.0)) throw ValidationError("scenario: axle_mix weights must be >= 0");
    mass += w;
  }
  if (arrival_rate > 0.0 && !(mass > 0.0)) throw ValidationError("scenario: axle_mix has no mass");
  check_prob(noise.dropout, "noise.dropout");
  check_prob(noise.spurious_rate, "noise.spurious_rate");
  check_prob(noise.occlusion_probability, "noise.occlusion_probability");
  check_prob(noise.ocr_error_persistence, "noise.ocr_error_persistence");
  if (!(noise.ocr_hard_error > 0.0 && noise.ocr_hard_error <= 1.0)) {
    throw ValidationError("scenario: noise.ocr_hard_error must be in (0,1]");
  }
  if (!(noise.jitter_px >= 0.0)) throw ValidationError("scenario: noise.jitter_px must be >= 0");
  if (noise.occlusion_frames < 1) throw ValidationError("scenario: noise.occlusion_frames must be >= 1");
  if (noise.ocr_char_error.size() > 1 && noise.ocr_char_error.size() != engines.size()) {
    throw ValidationError("scenario: ocr_char_error needs one value or one per engine");
  }
  for (double e : noise.ocr_char_error) check_prob(e, "noise.ocr_char_error");
  const Alphabet alphabet;
  std::set<std::string> plates;
  for (const auto& v : vehicles) {
    if (v.plate.empty() || !alphabet.accepts(v.plate)) throw ValidationError("scenario: bad plate '" + v.plate + "'");
    if (!plates.insert(v.plate).second) throw ValidationError("scenario: duplicate plate '" + v.plate + "'");
    if (v.axles < 1 || vehicle_length(v.axles) > image_width) throw ValidationError("scenario: axle count out of range");
    if (v.lane < 0 || v.lane >= lanes) throw ValidationError("scenario: lane out of range");
    if (!(v.speed > 0.0)) throw ValidationError("scenario: vehicle speed must be positive");
    if (v.arrival_frame < 0) throw ValidationError("scenario: arrival_frame must be >= 0");
  }
}

ScenarioSpec scenario_from_json(const Json& doc) {
  static const std::set<std::string> known{"rng_seed",      "duration_frames", "arrival_rate", "fps",
                                           "image_width",   "image_height",    "lanes",        "max_concurrent",
                                           "plate_formats", "axle_mix",        "speed_range",  "vehicles",
                                           "noise",         "engines",         "tail_frames"};
  static const std::set<std::string> known_noise{"dropout",          "jitter_px",
                                                 "ocr_char_error",   "ocr_error_persistence",
                                                 "ocr_hard_error",   "spurious_rate",
                                                 "occlusion_probability", "occlusion_frames"};
  if (!doc.is_object()) throw ValidationError("scenario: document must be an object");
  for (const auto& [k, _] : doc.items()) {
    if (!known.count(k)) throw ValidationError("scenario: unknown key '" + k + "'");
  }
  ScenarioSpec s;
  try {
    auto opt = [&](const Json& obj, const char* key, auto& out) {
      if (obj.contains(key)) out = obj.at(key).get<std::decay_t<decltype(out)>>();
    };
    opt(doc, "rng_seed", s.rng_seed);
    opt(doc, "duration_frames", s.duration_frames);
    opt(doc, "arrival_rate", s.arrival_rate);
    opt(doc, "fps", s.fps);
    opt(doc, "image_width", s.image_width);
    opt(doc, "image_height", s.image_height);
    opt(doc, "lanes", s.lanes);
    opt(doc, "max_concurrent", s.max_concurrent);
    opt(doc, "plate_formats", s.plate_formats);
    opt(doc, "engines", s.engines);
    opt(doc, "tail_frames", s.tail_frames);
    if (doc.contains("axle_mix")) {
      s.axle_mix.clear();
      for (const auto& [k, v] : doc.at("axle_mix").items()) s.axle_mix[std::stoi(k)] = v.get<double>();
    }
    if (doc.contains("speed_range")) {
      const auto& r = doc.at("speed_range");
      if (!r.is_array() || r.size() != 2) throw ValidationError("scenario: speed_range must be [min, max]");
      s.speed_min = r[0].get<double>();
      s.speed_max = r[1].get<double>();
    }
    if (doc.contains("vehicles")) {
      for (const auto& v : doc.at("vehicles")) {
        VehicleSpec vs;
        vs.plate = v.at("plate").get<std::string>();
        opt(v, "axles", vs.axles);
        opt(v, "speed", vs.speed);
        opt(v, "lane", vs.lane);
        opt(v, "arrival_frame", vs.arrival_frame);
        s.vehicles.push_back(std::move(vs));
      }
    }
    if (doc.contains("noise")) {
      const auto& n = doc.at("noise");
      for (const auto& [k, _] : n.items()) {
        if (!known_noise.count(k)) throw ValidationError("scenario: unknown noise key '" + k + "'");
      }
      opt(n, "dropout", s.noise.dropout);
      opt(n, "jitter_px", s.noise.jitter_px);
      if (n.contains("ocr_char_error")) {
        const auto& e = n.at("ocr_char_error");
        s.noise.ocr_char_error = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
      }
      opt(n, "ocr_error_persistence", s.noise.ocr_error_persistence);
      opt(n, "ocr_hard_error", s.noise.ocr_hard_error);
      opt(n, "spurious_rate", s.noise.spurious_rate);
      opt(n, "occlusion_probability", s.noise.occlusion_probability);
      opt(n, "occlusion_frames", s.noise.occlusion_frames);
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Json scenario_to_json(const ScenarioSpec& s) {
  Json mix = Json::object();
  for (const auto& [k, v] : s.axle_mix) mix[std::to_string(k)] = v;
  Json vehicles = Json::array();
  for (const auto& v : s.vehicles) {
    vehicles.push_back(
        {{"plate", v.plate}, {"axles", v.axles}, {"speed", v.speed}, {"lane", v.lane}, {"arrival_frame", v.arrival_frame}});
  }
  return {{"rng_seed", s.rng_seed},
          {"duration_frames", s.duration_frames},
          {"arrival_rate", s.arrival_rate},
          {"fps", s.fps},
          {"image_width", s.image_width},
          {"image_height", s.image_height},
          {"lanes", s.lanes},
          {"max_concurrent", s.max_concurrent},
          {"plate_formats", s.plate_formats},
          {"axle_mix", mix},
          {"speed_range", {s.speed_min, s.speed_max}},
          {"vehicles", vehicles},
          {"noise",
           {{"dropout", s.noise.dropout},
            {"jitter_px", s.noise.jitter_px},
            {"ocr_char_error", s.noise.ocr_char_error},
            {"ocr_error_persistence", s.noise.ocr_error_persistence},
            {"ocr_hard_error", s.noise.ocr_hard_error},
            {"spurious_rate", s.noise.spurious_rate},
            {"occlusion_probability", s.noise.occlusion_probability},
            {"occlusion_frames", s.noise.occlusion_frames}}},
          {"engines", s.engines},
          {"tail_frames", s.tail_frames}};
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError("scenario file " + path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

Json truth_to_json(const GroundTruth& truth) {
  Json vehicles = Json::array();
  for (const auto& v : truth.vehicles) {
    vehicles.push_back({{"vehicle_id", v.vehicle_id},
                        {"plate", v.plate},
                        {"axles", v.axles},
                        {"lane", v.lane},
                        {"speed", round6(v.speed)},
                        {"entry_frame", v.entry_frame},
                        {"exit_frame", v.exit_frame}});
  }
  Json frames = Json::array();
  for (const auto& f : truth.frames) {
    Json objs = Json::array();
    for (const auto& o : f.objects) {
      objs.push_back({{"vehicle_id", o.vehicle_id}, {"class", std::string(to_string(o.cls))}, {"box", box_to_json(o.box)}});
    }
    frames.push_back({{"frame_index", f.frame_index}, {"objects", objs}});
  }
  return {{"trace_id", truth.trace_id}, {"vehicles", vehicles}, {"frames", frames}};
}

GroundTruth truth_from_json(const Json& doc) {
  GroundTruth t;
  try {
    t.trace_id = doc.at("trace_id").get<std::string>();
    for (const auto& v : doc.at("vehicles")) {
      TruthVehicle tv;
      tv.vehicle_id = v.at("vehicle_id").get<std::uint64_t>();
      tv.plate = v.at("plate").get<std::string>();
      tv.axles = v.at("axles").get<int>();
      tv.lane = v.at("lane").get<int>();
      tv.speed = v.at("speed").get<double>();
      tv.entry_frame = v.at("entry_frame").get<std::int64_t>();
      tv.exit_frame = v.at("exit_frame").get<std::int64_t>();
      t.vehicles.push_back(std::move(tv));
    }
    for (const auto& f : doc.at("frames")) {
      TruthFrame tf;
      tf.frame_index = f.at("frame_index").get<std::int64_t>();
      for (const auto& o : f.at("objects")) {
        const auto cls = detection_class_from_string(o.at("class").get<std::string>());
        if (!cls) throw FormatError("truth: unknown class " + o.at("class").dump());
        tf.objects.push_back({o.at("vehicle_id").get<std::uint64_t>(), *cls, box_from_json(o.at("box"))});
      }
      t.frames.push_back(std::move(tf));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("truth: ") + e.what());
  }
  return t;
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open truth file " + path.string());
  try {
    return truth_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw FormatError("truth file " + path.string() + ": " + e.what());
  }
}

void save_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write truth file " + path.string());
  out << truth_to_json(truth).dump() << '\n';
}

GeneratedScenario generate(const ScenarioSpec& spec) {
  spec.validate();
  const auto formats = parse_formats(spec.plate_formats);
  const double lane_band = static_cast<double>(spec.image_height) / spec.lanes;
  const double width = spec.image_width;

  SimRng arrivals(mix(spec.rng_seed, 1));
  std::vector<SimVehicle> fleet;
  std::vector<int> lane_last(spec.lanes, -1);  // index into fleet
  std::set<std::string> used_plates;
  for (const auto& v : spec.vehicles) used_plates.insert(v.plate);

  auto lane_gap_ok = [&](int lane, double length, std::int64_t f) {
    const int last = lane_last[lane];
    if (last < 0 || !fleet[last].visible(f)) return true;
    return fleet[last].x_min(f) >= length + kHeadwayPx;
  };
  auto in_view = [&](std::int64_t f) {
    return std::count_if(fleet.begin(), fleet.end(), [f](const SimVehicle& v) { return v.visible(f); });
  };
  auto spawn = [&](std::string plate, int axles, double speed, int lane, std::int64_t f) {
    SimVehicle v;
    const int last = lane_last[lane];
    // never faster than the vehicle ahead: gaps only grow
    if (last >= 0 && fleet[last].visible(f)) speed = std::min(speed, fleet[last].truth.speed);
    v.length = vehicle_length(axles);
    v.height = vehicle_height(axles);
    v.lane_bottom = lane_band * (lane + 1) - 0.04 * lane_band;
    v.truth.vehicle_id = fleet.size() + 1;
    v.truth.plate = std::move(plate);
    v.truth.axles = axles;
    v.truth.lane = lane;
    v.truth.speed = speed;
    v.truth.entry_frame = f;
    v.truth.exit_frame = f + static_cast<std::int64_t>(std::floor((width - v.length) / speed));
    lane_last[lane] = static_cast<int>(fleet.size());
    fleet.push_back(std::move(v));
  };

  std::vector<VehicleSpec> pending = spec.vehicles;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const VehicleSpec& a, const VehicleSpec& b) { return a.arrival_frame < b.arrival_frame; });
  double mix_mass = 0.0;
  for (const auto& [k, w] : spec.axle_mix) mix_mass += w;

  for (std::int64_t f = 0; f < spec.duration_frames || (!pending.empty() && f < spec.duration_frames + 100000); ++f) {
    // scripted vehicles wait for their lane
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->arrival_frame <= f && in_view(f) < spec.max_concurrent &&
          lane_gap_ok(it->lane, vehicle_length(it->axles), f)) {
        spawn(it->plate, it->axles, it->speed, it->lane, f);
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    if (f >= spec.duration_frames) continue;
    const double u = arrivals.uniform();
    const double axle_u = arrivals.uniform() * mix_mass;
    const double speed = arrivals.uniform(spec.speed_min, spec.speed_max);
    const double lane_u = arrivals.uniform();
    const auto fmt_index = arrivals.index(formats.size());
    std::string plate = random_plate(formats[fmt_index], arrivals);
    if (!(u < spec.arrival_rate / 100.0)) continue;
    int axles = spec.axle_mix.empty() ? 2 : spec.axle_mix.rbegin()->first;
    double acc = 0.0;
    for (const auto& [k, w] : spec.axle_mix) {
      acc += w;
      if (axle_u < acc) {
        axles = k;
        break;
      }
    }
    std::vector<int> open;
    for (int l = 0; l < spec.lanes; ++l) {
      if (lane_gap_ok(l, vehicle_length(axles), f)) open.push_back(l);
    }
    if (open.empty() || in_view(f) >= spec.max_concurrent) continue;
    for (int tries = 0; used_plates.count(plate) && tries < 1000; ++tries) {
      plate = random_plate(formats[fmt_index], arrivals);
    }
    if (used_plates.count(plate)) continue;
    used_plates.insert(plate);
    const int lane = open[std::min(open.size() - 1, static_cast<std::size_t>(lane_u * open.size()))];
    spawn(std::move(plate), axles, speed, lane, f);
  }

  // per-vehicle OCR difficulty and occlusion window, independent of the arrival stream
  for (auto& v : fleet) {
    SimRng vr(mix(spec.rng_seed, mix(2, v.truth.vehicle_id)));
    v.ocr = make_profile(spec, v.truth.plate, vr);
    const double u = vr.uniform();
    const double s = vr.uniform();
    const std::int64_t span = v.truth.exit_frame - v.truth.entry_frame + 1;
    const std::int64_t room = span - spec.noise.occlusion_frames - 6;
    if (u < spec.noise.occlusion_probability && room > 0) {
      v.occlusion_start = v.truth.entry_frame + 3 + static_cast<std::int64_t>(s * static_cast<double>(room));
    }
  }

  std::int64_t last_frame = spec.duration_frames - 1;
  for (const auto& v : fleet) last_frame = std::max(last_frame, v.truth.exit_frame);
  const std::int64_t total = last_frame + 1 + spec.tail_frames;

  GeneratedScenario out;
  out.frames.reserve(static_cast<std::size_t>(std::max<std::int64_t>(total, 0)));
  for (std::int64_t f = 0; f < total; ++f) {
    SimRng fr(mix(spec.rng_seed, mix(3, static_cast<std::uint64_t>(f))));
    FrameDetections frame;
    frame.frame_index = f;
    frame.timestamp_ms = std::llround(static_cast<double>(f) * 1000.0 / spec.fps);
    TruthFrame tf;
    tf.frame_index = f;
    for (const auto& v : fleet) {
      if (!v.visible(f)) continue;
      if (v.occlusion_start >= 0 && f >= v.occlusion_start && f < v.occlusion_start + spec.noise.occlusion_frames) {
        continue;
      }
      const auto boxes = true_boxes(v, f);
      const auto id = v.truth.vehicle_id;
      tf.objects.push_back({id, DetectionClass::Vehicle, boxes.vehicle});
      tf.objects.push_back({id, DetectionClass::LicensePlate, boxes.plate});
      for (const auto& w : boxes.wheels) tf.objects.push_back({id, DetectionClass::Wheel, w});

      auto emit = [&](DetectionClass cls, const BoundingBox& box, double lo, double hi) -> Detection* {
        const bool drop = fr.bernoulli(spec.noise.dropout);
        const BoundingBox b = jitter(box, spec.noise.jitter_px, fr);
        const double conf = fr.uniform(lo, hi);
        if (drop) return nullptr;
        frame.detections.push_back({b, cls, conf, {}});
        return &frame.detections.back();
      };
      emit(DetectionClass::Vehicle, boxes.vehicle, 0.75, 0.99);
      std::vector<RawPlateRead> reads;
      for (std::size_t e = 0; e < spec.engines.size(); ++e) reads.push_back(read_plate(spec, v, e, fr));
      if (Detection* p = emit(DetectionClass::LicensePlate, boxes.plate, 0.60, 0.95)) p->raw_reads = std::move(reads);
      for (const auto& w : boxes.wheels) emit(DetectionClass::Wheel, w, 0.55, 0.95);
    }
    const bool spurious = fr.bernoulli(spec.noise.spurious_rate);
    Detection junk = spurious_detection(spec, formats, fr);
    if (spurious) frame.detections.push_back(std::move(junk));
    if (!tf.objects.empty()) out.truth.frames.push_back(std::move(tf));
    out.frames.push_back(std::move(frame));
  }

  for (const auto& v : fleet) out.truth.vehicles.push_back(v.truth);
  out.truth.trace_id = trace_id_of(out.frames);
  return out;
}

std::vector<FrameDetections> filter_engine(const std::vector<FrameDetections>& frames, const std::string& engine_id) {
  std::vector<FrameDetections> out = frames;
  for (auto& f : out) {
    for (auto& d : f.detections) {
      std::erase_if(d.raw_reads, [&](const RawPlateRead& r) { return r.engine_id != engine_id; });
    }
  }
  return out;
}

int peak_concurrency(const GroundTruth& truth) {
  std::map<std::int64_t, int> delta;
  for (const auto& v : truth.vehicles) {
    delta[v.entry_frame] += 1;
    delta[v.exit_frame + 1] -= 1;
  }
  int cur = 0, peak = 0;
  for (const auto& [f, d] : delta) {
    cur += d;
    peak = std::max(peak, cur);
  }
  return peak;
}

}  // namespace tollplaza
