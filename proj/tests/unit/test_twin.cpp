#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rt2v/error.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/twin.hpp"
#include "scratch.hpp"

using namespace rt2v;

namespace {

DigitalTwin two_frame_twin() {
  return oracle::make_twin("vid", {{{1, "cat", 0.2, 0.5, 0.3, 0.1}, {2, "table", 0.7, 0.6, 0.5, 0.3}},
                                   {{1, "cat", 0.25, 0.5, 0.3, 0.1}, {2, "table", 0.7, 0.6, 0.5, 0.3}}});
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an rt2v::Error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_SUITE("twin_model") {
  TEST_CASE("well-formed twin has no violations") { CHECK(validate_twin(two_frame_twin()).empty()); }

  TEST_CASE("category change across frames names the instance") {
    DigitalTwin t = oracle::make_twin("v", {{{3, "cat", 0.1, 0.1, 0.1, 0.1}}, {{3, "dog", 0.1, 0.1, 0.1, 0.1}}});
    auto v = validate_twin(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].instance_id == TrackId{3});
    CHECK(v[0].frame_index == FrameIndex{1});
    CHECK(v[0].rule.find("category") != std::string::npos);
  }

  TEST_CASE("out-of-range x names the spatial bound") {
    DigitalTwin t = two_frame_twin();
    t.frames[0].instances[0].spatial.x = 1.4;
    auto v = validate_twin(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule.find("SpatialProps.x") != std::string::npos);
    CHECK(v[0].instance_id == TrackId{1});
  }

  TEST_CASE("every structural rule is reported without aborting") {
    DigitalTwin t;
    CHECK(!validate_twin(t).empty());  // no frames, empty id
    t = two_frame_twin();
    t.fps = 0;
    t.width = 0;
    t.frames[1].frame_index = 0;
    t.frames[1].timestamp_s = -1;
    t.frames[1].instances[1].instance_id = 1;
    t.frames[1].instances[1].mask_ref.clear();
    t.frames[0].instances[0].spatial.size = std::nan("");
    CHECK(validate_twin(t).size() >= 7);
  }

  TEST_CASE("validation is total on random well-typed input") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
      DigitalTwin t = oracle::random_twin(rng);
      std::uniform_real_distribution<double> wild(-2.0, 3.0);
      if (!t.frames.empty() && !t.frames[0].instances.empty()) t.frames[0].instances[0].spatial.depth = wild(rng);
      if (i % 7 == 0) std::reverse(t.frames.begin(), t.frames.end());
      CHECK_NOTHROW(validate_twin(t));
    }
  }

  TEST_CASE("serialization round-trips random twins") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
      const DigitalTwin t = oracle::random_twin(rng, "v" + std::to_string(i));
      REQUIRE(validate_twin(t).empty());
      const std::string text = serialize_twin(t);
      const DigitalTwin back = parse_twin(text);
      CHECK(back == t);
      CHECK(serialize_twin(back) == text);
    }
  }

  TEST_CASE("canonical form sorts keys and renders reals shortest") {
    DigitalTwin t = oracle::make_twin("v", {{{7, "cat", 0.1, 0.5, 1.0, 0.0}}});
    const std::string s = serialize_twin(t);
    CHECK(s.find("\"fps\":1.0") != std::string::npos);
    CHECK(s.find("\"x\":0.1,") != std::string::npos);
    CHECK(s.find("\"depth\":1.0") != std::string::npos);
    CHECK(s.find("\"instance_id\":7") != std::string::npos);
    CHECK(s.find(' ') == std::string::npos);
    CHECK(s.find("\"frames\"") < s.find("\"height\""));
    CHECK(s.find("\"height\"") < s.find("\"video_id\""));
  }

  TEST_CASE("golden twin document is stable") {
    const std::string golden = read_text_file(std::string(RT2V_TEST_DATA) + "/golden_twin.json");
    DigitalTwin t;
    t.video_id = "golden";
    t.fps = 25.0;
    t.width = 640;
    t.height = 360;
    FrameRecord f;
    f.frame_index = 0;
    f.timestamp_s = 0.0;
    f.instances.push_back({4, "cat", {"orange", "striped"}, "golden/4_0.rle", {0.125, 0.5, 0.3, 0.0625}});
    t.frames.push_back(f);
    CHECK(serialize_twin(t) == golden);
    CHECK(serialize_twin(parse_twin(golden)) == golden);
  }

  TEST_CASE("parse errors have distinct kinds") {
    const std::string good = serialize_twin(two_frame_twin());
    CHECK(kind_of([] { parse_twin("{not json"); }) == ErrorKind::kMalformedJson);
    json doc = parse_json(good);
    doc.erase("video_id");
    CHECK(kind_of([&] { parse_twin(doc.dump()); }) == ErrorKind::kMissingField);
    doc = parse_json(good);
    doc["frames"][0]["instances"][0]["spatial"]["x"] = 1.5;
    CHECK(kind_of([&] { parse_twin(doc.dump()); }) == ErrorKind::kInvariantViolation);
    doc = parse_json(good);
    doc["width"] = "wide";
    CHECK(kind_of([&] { parse_twin(doc.dump()); }) == ErrorKind::kMalformedJson);
  }

  TEST_CASE("RLE fixed examples") {
    MaskBitmap bg(2, 2);
    CHECK(rle_encode(bg) == "R1 2 2 4");
    MaskBitmap fg(2, 2);
    for (std::uint32_t y = 0; y < 2; ++y)
      for (std::uint32_t x = 0; x < 2; ++x) fg.set(x, y);
    CHECK(rle_encode(fg) == "R1 2 2 0 4");
    MaskBitmap center(3, 3);
    center.set(1, 1);
    CHECK(rle_encode(center) == "R1 3 3 4 1 4");
    CHECK(rle_decode("R1 3 3 4 1 4") == center);
    CHECK(rle_decode("R1 3 3 4 1 4\n") == center);
  }

  TEST_CASE("RLE round-trips random bitmaps") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
      const MaskBitmap m = oracle::random_mask(rng);
      const std::string s = rle_encode(m);
      CHECK(rle_decode(s) == m);
      CHECK(rle_encode(rle_decode(s)) == s);
      // Runs alternate and no interior run is zero.
      std::istringstream in(s.substr(3));
      std::uint64_t w, h, run, sum = 0;
      in >> w >> h;
      bool first = true;
      while (in >> run) {
        if (!first) CHECK(run > 0);
        first = false;
        sum += run;
      }
      CHECK(sum == w * h);
    }
  }

  TEST_CASE("RLE decode errors") {
    CHECK(kind_of([] { rle_decode("R1 2 2 3"); }) == ErrorKind::kInvalidArgument);
    CHECK_THROWS_AS(rle_decode("R1 2 2 x"), Error);
    CHECK_THROWS_AS(rle_decode("R1 0 2 0"), Error);
    CHECK_THROWS_AS(rle_decode("R1 -2 2 4"), Error);
    CHECK_THROWS_AS(rle_decode("R2 2 2 4"), Error);
    CHECK(rle_encode(rle_decode("R1 2 2 2 0 2")) == "R1 2 2 4");
  }

  TEST_CASE("mask files are newline-terminated") {
    oracle::ScratchDir dir("mask");
    MaskBitmap m(3, 3);
    m.set(1, 1);
    write_mask_file(dir / "a/b.rle", m);
    CHECK(read_text_file(dir / "a/b.rle") == "R1 3 3 4 1 4\n");
    CHECK(read_mask_file(dir / "a/b.rle") == m);
  }
}
