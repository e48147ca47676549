#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/trace_io.hpp"

using namespace tollplaza;
using tollplaza::testing::Gen;

TEST(Iou, IdenticalBoxesGiveOne) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0); }

TEST(Iou, DisjointBoxesGiveZero) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0); }

TEST(Iou, HalfShiftGivesOneThird) {
  // intersection 5*10 = 50, union 100 + 100 - 50 = 150
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 50.0 / 150.0, 1e-12);
}

TEST(Iou, DegenerateBoxesGiveZeroEvenAgainstThemselves) {
  const BoundingBox point{2, 2, 2, 2};
  const BoundingBox line{0, 0, 10, 0};
  EXPECT_EQ(iou(point, point), 0.0);
  EXPECT_EQ(iou(line, line), 0.0);
  EXPECT_EQ(iou(point, {0, 0, 10, 10}), 0.0);
}

TEST(BoxCenter, Examples) {
  EXPECT_EQ(box_center({0, 0, 10, 10}), std::make_pair(5.0, 5.0));
  EXPECT_EQ(box_center({2, 2, 2, 2}), std::make_pair(2.0, 2.0));
  EXPECT_EQ(box_center({1, 3, 5, 11}), std::make_pair(3.0, 7.0));
}

TEST(Contains, Examples) {
  EXPECT_TRUE(contains({0, 0, 100, 100}, {10, 10, 20, 20}, 0));
  EXPECT_FALSE(contains({0, 0, 100, 100}, {95, 95, 110, 110}, 0));
  EXPECT_TRUE(contains({0, 0, 100, 100}, {95, 95, 110, 110}, 10));
}

TEST(ContainmentRatio, FractionOfInnerCovered) {
  EXPECT_DOUBLE_EQ(containment_ratio({0, 0, 100, 100}, {10, 10, 20, 20}), 1.0);
  EXPECT_DOUBLE_EQ(containment_ratio({0, 0, 100, 100}, {90, 0, 110, 10}), 0.5);
  EXPECT_DOUBLE_EQ(containment_ratio({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
}

TEST(BoundingBoxType, AreaIsWidthTimesHeight) {
  Gen g(11);
  for (int i = 0; i < 500; ++i) {
    const auto b = g.box();
    ASSERT_TRUE(b.valid());
    EXPECT_GE(b.area(), 0.0);
    EXPECT_DOUBLE_EQ(b.area(), (b.x_max - b.x_min) * (b.y_max - b.y_min));
  }
}

TEST(IouProperty, Symmetric) {
  Gen g(1);
  for (int i = 0; i < 2000; ++i) {
    const auto a = g.box(300), b = g.box(300);
    ASSERT_EQ(iou(a, b), iou(b, a)) << "case " << i;
  }
}

TEST(IouProperty, SelfIsOneForPositiveArea) {
  Gen g(2);
  for (int i = 0; i < 2000; ++i) {
    const auto a = g.box();
    ASSERT_NEAR(iou(a, a), 1.0, 1e-12);
  }
}

TEST(IouProperty, TranslationInvariant) {
  Gen g(3);
  for (int i = 0; i < 2000; ++i) {
    const auto a = g.box(300), b = g.box(300);
    const double dx = g.real(-500, 500), dy = g.real(-500, 500);
    ASSERT_NEAR(iou(a, b), iou(a.translated(dx, dy), b.translated(dx, dy)), 1e-9) << "case " << i;
  }
}

TEST(IouProperty, BoundedByAreaRatio) {
  Gen g(4);
  for (int i = 0; i < 2000; ++i) {
    const auto a = g.box(200), b = g.box(200);
    const double v = iou(a, b);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, std::min(1.0, a.area() / b.area()) + 1e-12);
  }
}

TEST(DetectionClassNames, RoundTrip) {
  for (auto c : kAllDetectionClasses) EXPECT_EQ(detection_class_from_string(to_string(c)), c);
  EXPECT_FALSE(detection_class_from_string("Truck"));
}

TEST(AlphabetType, DefaultIsUppercaseAlphanumeric) {
  const Alphabet a;
  EXPECT_TRUE(a.accepts("ABC1234"));
  EXPECT_FALSE(a.accepts("abc1234"));
  EXPECT_FALSE(a.accepts("AB-123"));
  const Alphabet custom("ABC");
  EXPECT_TRUE(custom.accepts("CAB"));
  EXPECT_FALSE(custom.accepts("ABD"));
}

// ---- trace format ----

TEST(TraceFormat, FieldNamesAreExact) {
  FrameDetections f{7, 231, {tollplaza::testing::plate({1, 2, 3, 4}, {tollplaza::testing::read("easyocr", "AB", 0.5)})}};
  const auto j = Json::parse(serialize_frame(f));
  EXPECT_EQ(j.at("frame_index"), 7);
  EXPECT_EQ(j.at("timestamp_ms"), 231);
  const auto& d = j.at("detections").at(0);
  EXPECT_EQ(d.at("class"), "LicensePlate");
  EXPECT_EQ(d.at("box"), Json::array({1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(d.at("raw_reads").at(0).at("engine_id"), "easyocr");
  EXPECT_EQ(d.at("raw_reads").at(0).at("text"), "AB");
  EXPECT_EQ(d.at("raw_reads").at(0).at("char_confidences").size(), 2u);
}

TEST(TraceFormat, RoundTripIntegersExactRealsToSixPlaces) {
  Gen g(5);
  for (int i = 0; i < 300; ++i) {
    FrameDetections f;
    f.frame_index = g.integer(0, 1 << 30);
    f.timestamp_ms = static_cast<std::int64_t>(g.integer(0, 1 << 30)) * 1000;
    const int n = g.integer(0, 5);
    for (int k = 0; k < n; ++k) {
      Detection d;
      d.cls = kAllDetectionClasses[g.integer(0, 3)];
      d.box = g.box();
      d.confidence = g.real(0, 1);
      if (d.cls == DetectionClass::LicensePlate) {
        const auto t = g.plate();
        std::vector<double> c;
        for (std::size_t j = 0; j < t.size(); ++j) c.push_back(g.real(0, 1));
        d.raw_reads.push_back({"easyocr", t, c});
      }
      f.detections.push_back(d);
    }
    const auto back = parse_frame(serialize_frame(f));
    ASSERT_EQ(back.frame_index, f.frame_index);
    ASSERT_EQ(back.timestamp_ms, f.timestamp_ms);
    ASSERT_EQ(back.detections.size(), f.detections.size());
    for (std::size_t k = 0; k < f.detections.size(); ++k) {
      const auto& a = f.detections[k];
      const auto& b = back.detections[k];
      ASSERT_EQ(a.cls, b.cls);
      ASSERT_NEAR(a.confidence, b.confidence, 5e-7);
      ASSERT_NEAR(a.box.x_min, b.box.x_min, 5e-7);
      ASSERT_NEAR(a.box.y_max, b.box.y_max, 5e-7);
      ASSERT_EQ(a.raw_reads.size(), b.raw_reads.size());
      for (std::size_t r = 0; r < a.raw_reads.size(); ++r) {
        ASSERT_EQ(a.raw_reads[r].text, b.raw_reads[r].text);
        for (std::size_t c = 0; c < a.raw_reads[r].text.size(); ++c)
          ASSERT_NEAR(a.raw_reads[r].char_confidences[c], b.raw_reads[r].char_confidences[c], 5e-7);
      }
    }
    // a second trip is byte-stable
    ASSERT_EQ(serialize_frame(back), serialize_frame(parse_frame(serialize_frame(back))));
  }
}

TEST(TraceFormat, RejectsInvariantViolations) {
  EXPECT_THROW(parse_frame("not json"), FormatError);
  EXPECT_THROW(parse_frame(R"({"frame_index":0,"timestamp_ms":0,"detections":[{"class":"Vehicle","confidence":1.5,"box":[0,0,1,1],"raw_reads":[]}]})"),
               FormatError);
  EXPECT_THROW(parse_frame(R"({"frame_index":0,"timestamp_ms":0,"detections":[{"class":"Vehicle","confidence":0.5,"box":[5,0,1,1],"raw_reads":[]}]})"),
               FormatError);
  // reads only on plates
  EXPECT_THROW(parse_frame(R"({"frame_index":0,"timestamp_ms":0,"detections":[{"class":"Wheel","confidence":0.5,"box":[0,0,1,1],"raw_reads":[{"engine_id":"e","text":"A","char_confidences":[0.5]}]}]})"),
               FormatError);
  // one confidence per character
  EXPECT_THROW(parse_frame(R"({"frame_index":0,"timestamp_ms":0,"detections":[{"class":"LicensePlate","confidence":0.5,"box":[0,0,1,1],"raw_reads":[{"engine_id":"e","text":"AB","char_confidences":[0.5]}]}]})"),
               FormatError);
  // lowercase is outside the default alphabet
  EXPECT_THROW(parse_frame(R"({"frame_index":0,"timestamp_ms":0,"detections":[{"class":"LicensePlate","confidence":0.5,"box":[0,0,1,1],"raw_reads":[{"engine_id":"e","text":"ab","char_confidences":[0.5,0.5]}]}]})"),
               FormatError);
}

TEST(TraceReaderTest, FingerprintMatchesWriter) {
  const auto frames = tollplaza::testing::single_pass("ABC1234", 12);
  std::stringstream ss;
  for (const auto& f : frames) ss << serialize_frame(f) << '\n';
  TraceReader reader(ss);
  std::vector<FrameDetections> back;
  while (auto f = reader.next()) back.push_back(*f);
  EXPECT_EQ(back.size(), frames.size());
  EXPECT_EQ(reader.trace_id(), trace_id_of(frames));
}

TEST(Fnv1a, KnownVectors) {
  // published FNV-1a 64-bit test vectors
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Round6, RoundsHalfAwayAtSixthPlace) {
  EXPECT_DOUBLE_EQ(round6(0.1234564), 0.123456);
  EXPECT_DOUBLE_EQ(round6(0.1234566), 0.123457);
  EXPECT_DOUBLE_EQ(round6(-2.0000004), -2.0);
}
