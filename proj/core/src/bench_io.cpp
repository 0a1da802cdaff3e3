#include "rt2v/bench_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "rt2v/embedding.hpp"
#include "rt2v/error.hpp"
#include "rt2v/llm.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/reasoner.hpp"

namespace fs = std::filesystem;

namespace rt2v {

json QueryCombination::to_json() const {
  return {{"subject_category", subject_category},
          {"attribute", attribute},
          {"predicate", predicate_name(predicate)},
          {"reference_category", reference_category}};
}

QueryCombination QueryCombination::from_json(const json& doc) {
  const std::string name = require_string(doc, "predicate", "combination");
  auto p = parse_predicate(name);
  if (!p) throw Error(ErrorKind::kMalformedJson, "unknown predicate \"" + name + "\"");
  return {require_string(doc, "subject_category", "combination"),
          require_string(doc, "attribute", "combination"), *p,
          require_string(doc, "reference_category", "combination")};
}

const DigitalTwin* Benchmark::find(std::string_view video_id) const {
  auto it = std::lower_bound(twins.begin(), twins.end(), video_id,
                             [](const DigitalTwin& t, std::string_view id) { return t.video_id < id; });
  return (it != twins.end() && it->video_id == video_id) ? &*it : nullptr;
}

json manifest_to_json(const BenchmarkManifest& m) {
  json doc = {{"name", m.name},
              {"twin_dir", m.twin_dir},
              {"mask_dir", m.mask_dir},
              {"queries_file", m.queries_file},
              {"fixtures_dir", m.fixtures_dir}};
  if (m.declared_video_count) doc["declared_video_count"] = *m.declared_video_count;
  if (m.declared_query_count) doc["declared_query_count"] = *m.declared_query_count;
  return doc;
}

json queries_to_json(const std::vector<QueryEntry>& queries) {
  json arr = json::array();
  for (const auto& q : queries) {
    json doc = {{"query_id", q.query_id},
                {"text", q.text},
                {"gt_video_id", q.gt_video_id},
                {"gt_object_ids", q.gt_object_ids}};
    if (q.decomposition_fixture) doc["decomposition_fixture"] = *q.decomposition_fixture;
    if (q.combination) doc["combination"] = q.combination->to_json();
    arr.push_back(std::move(doc));
  }
  return {{"queries", std::move(arr)}};
}

namespace {

std::string optional_string(const json& doc, const char* key, std::string fallback) {
  if (!doc.contains(key)) return fallback;
  return require_string(doc, key, "manifest");
}

}  // namespace

Benchmark load_benchmark(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::kIo, "benchmark directory " + root.string() + " does not exist");
  }
  Benchmark b;
  b.root = root;
  const json manifest = parse_json(read_text_file(root / "manifest.json"));
  auto& m = b.manifest;
  m.name = require_string(manifest, "name", "manifest");
  m.twin_dir = optional_string(manifest, "twin_dir", m.twin_dir);
  m.mask_dir = optional_string(manifest, "mask_dir", m.mask_dir);
  m.queries_file = optional_string(manifest, "queries_file", m.queries_file);
  m.fixtures_dir = optional_string(manifest, "fixtures_dir", m.fixtures_dir);
  if (manifest.contains("declared_video_count")) {
    m.declared_video_count = require_unsigned(manifest, "declared_video_count", "manifest");
  }
  if (manifest.contains("declared_query_count")) {
    m.declared_query_count = require_unsigned(manifest, "declared_query_count", "manifest");
  }

  if (!fs::is_directory(b.twin_dir())) {
    throw Error(ErrorKind::kIo, "twin directory " + b.twin_dir().string() + " does not exist");
  }
  std::vector<fs::path> twin_files;
  for (const auto& entry : fs::directory_iterator(b.twin_dir())) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      twin_files.push_back(entry.path());
    }
  }
  std::sort(twin_files.begin(), twin_files.end());
  for (const auto& path : twin_files) {
    DigitalTwin twin;
    try {
      twin = parse_twin(read_text_file(path));
    } catch (const Error& e) {
      throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
    if (twin.video_id != path.stem().string()) {
      throw Error(ErrorKind::kInvariantViolation, path.filename().string() +
                                                      " holds video_id \"" + twin.video_id + "\"");
    }
    b.twins.push_back(std::move(twin));
  }
  std::sort(b.twins.begin(), b.twins.end(),
            [](const DigitalTwin& a, const DigitalTwin& c) { return a.video_id < c.video_id; });

  const json qdoc = parse_json(read_text_file(root / m.queries_file));
  std::set<std::string> seen;
  for (const json& q : require_array(qdoc, "queries", "queries file")) {
    QueryEntry e;
    e.query_id = require_string(q, "query_id", "query");
    e.text = require_string(q, "text", "query");
    e.gt_video_id = require_string(q, "gt_video_id", "query");
    for (const json& id : require_array(q, "gt_object_ids", "query")) {
      if (!id.is_number_unsigned()) {
        throw Error(ErrorKind::kMalformedJson, "query " + e.query_id + ": gt_object_ids must be integers");
      }
      e.gt_object_ids.push_back(id.get<TrackId>());
    }
    if (q.contains("decomposition_fixture")) {
      e.decomposition_fixture = require_string(q, "decomposition_fixture", "query");
    }
    if (q.contains("combination")) e.combination = QueryCombination::from_json(q["combination"]);

    if (e.text.empty()) throw Error(ErrorKind::kInvalidArgument, "query " + e.query_id + " has empty text");
    if (!seen.insert(e.query_id).second) {
      throw Error(ErrorKind::kDuplicateId, "duplicate query_id \"" + e.query_id + "\"");
    }
    const DigitalTwin* twin = b.find(e.gt_video_id);
    if (twin == nullptr) {
      throw Error(ErrorKind::kMissingTwin, "query " + e.query_id + " references missing video \"" +
                                               e.gt_video_id + "\"");
    }
    for (TrackId id : e.gt_object_ids) {
      if (!twin->has_track(id)) {
        throw Error(ErrorKind::kDanglingReference, "query " + e.query_id + " references object " +
                                                       std::to_string(id) + " absent from \"" +
                                                       e.gt_video_id + "\"");
      }
    }
    m.queries.push_back(std::move(e));
  }

  if (m.declared_video_count && *m.declared_video_count != b.twins.size()) {
    throw Error(ErrorKind::kCountMismatch, "manifest declares " +
                                               std::to_string(*m.declared_video_count) +
                                               " videos, found " + std::to_string(b.twins.size()));
  }
  if (m.declared_query_count && *m.declared_query_count != m.queries.size()) {
    throw Error(ErrorKind::kCountMismatch, "manifest declares " +
                                               std::to_string(*m.declared_query_count) +
                                               " queries, found " + std::to_string(m.queries.size()));
  }
  return b;
}

bool satisfies_combination(const DigitalTwin& twin, const QueryCombination& combo,
                           const RelationConfig& cfg) {
  std::map<TrackId, const InstanceRecord*> first;
  std::map<TrackId, bool> has_attribute;
  for (const auto& frame : twin.frames) {
    for (const auto& inst : frame.instances) {
      first.emplace(inst.instance_id, &inst);
      auto& flag = has_attribute[inst.instance_id];
      flag = flag || std::find(inst.attributes.begin(), inst.attributes.end(), combo.attribute) !=
                         inst.attributes.end();
    }
  }
  for (const auto& t : extract_relations(twin, cfg)) {
    if (t.predicate != combo.predicate) continue;
    if (first[t.subject_id]->category == combo.subject_category && has_attribute[t.subject_id] &&
        first[t.object_id]->category == combo.reference_category) {
      return true;
    }
  }
  return false;
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::kInvalidArgument, why); };
  if (video_count == 0) fail("video count must be positive");
  if (query_count == 0) fail("query count must be positive");
  if (distractor_count >= video_count) fail("at least one video must carry queries");
  if (min_tracks < 2 || max_tracks < min_tracks) fail("track range must satisfy 2 <= min <= max");
  if (frames_per_video == 0) fail("frames per video must be positive");
  if (width == 0 || height == 0) fail("frame size must be positive");
  if (categories.size() < 2 || attributes.size() < 2) fail("vocabulary tables are too small");
}

json SyntheticSpec::to_json() const {
  return {{"seed", seed},
          {"video_count", video_count},
          {"distractor_count", distractor_count},
          {"min_tracks", min_tracks},
          {"max_tracks", max_tracks},
          {"query_count", query_count},
          {"frames_per_video", frames_per_video},
          {"width", width},
          {"height", height},
          {"categories", categories},
          {"attributes", attributes}};
}

namespace {

constexpr std::array<Predicate, 6> kSyntheticPredicates = {
    Predicate::kLeftOf, Predicate::kRightOf,   Predicate::kAbove,
    Predicate::kBelow,  Predicate::kInFrontOf, Predicate::kBehind,
};

constexpr std::array<const char*, 5> kTemplates = {
    "Which video has the {A} {S} positioned {W} the {R}?",
    "Find the clip where a {A} {S} can be seen {W} a {R}.",
    "Show me footage of a {S} that looks {A} and sits {W} the {R}.",
    "I remember a {A} {S} somewhere {W} a {R}; which video was it?",
    "Locate the scene in which a {A} {S} appears {W} the {R}.",
};

struct TrackPlan {
  std::string category;
  std::vector<std::string> attributes;
  SpatialProps base;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  template <typename T>
  const T& choose(const std::vector<T>& v) { return v[pick(v.size())]; }

  SpatialProps random_spatial() {
    return {uniform(0.1, 0.9), uniform(0.1, 0.9), uniform(0.1, 0.9), uniform(0.01, 0.3)};
  }

  // Places subject and reference so `p` holds with a wide margin.
  std::pair<SpatialProps, SpatialProps> place_pair(Predicate p) {
    SpatialProps s = random_spatial(), r = random_spatial();
    const double low = uniform(0.1, 0.3), high = uniform(0.6, 0.9);
    switch (p) {
      case Predicate::kLeftOf: s.x = low; r.x = high; break;
      case Predicate::kRightOf: s.x = high; r.x = low; break;
      case Predicate::kAbove: s.y = low; r.y = high; break;
      case Predicate::kBelow: s.y = high; r.y = low; break;
      case Predicate::kInFrontOf: s.depth = low; r.depth = high; break;
      case Predicate::kBehind: s.depth = high; r.depth = low; break;
      default: break;
    }
    return {s, r};
  }

  std::string other_than(const std::vector<std::string>& pool, const std::string& avoid) {
    std::string v;
    do {
      v = choose(pool);
    } while (v == avoid);
    return v;
  }

  std::vector<TrackPlan> annotated_tracks(const QueryCombination& c) {
    auto [s, r] = place_pair(c.predicate);
    std::vector<TrackPlan> tracks = {
        {c.subject_category, {c.attribute}, s},
        {c.reference_category, {choose(spec_.attributes)}, r},
    };
    add_fillers(tracks);
    return tracks;
  }

  std::vector<TrackPlan> distractor_tracks(const QueryCombination& near_miss) {
    std::vector<TrackPlan> tracks;
    if (pick(2) == 0) {
      // Right objects and attribute, converse relation.
      auto [s, r] = place_pair(*converse(near_miss.predicate));
      tracks = {{near_miss.subject_category, {near_miss.attribute}, s},
                {near_miss.reference_category, {choose(spec_.attributes)}, r}};
    } else {
      // Right relation, wrong attribute.
      auto [s, r] = place_pair(near_miss.predicate);
      tracks = {{near_miss.subject_category, {other_than(spec_.attributes, near_miss.attribute)}, s},
                {near_miss.reference_category, {choose(spec_.attributes)}, r}};
    }
    add_fillers(tracks);
    return tracks;
  }

  void add_fillers(std::vector<TrackPlan>& tracks) {
    const std::size_t n =
        spec_.min_tracks + pick(spec_.max_tracks - spec_.min_tracks + 1);
    while (tracks.size() < n) {
      tracks.push_back({choose(spec_.categories), {choose(spec_.attributes)}, random_spatial()});
    }
  }

  DigitalTwin realize(const std::string& video_id, std::vector<TrackPlan> tracks,
                      std::vector<TrackId>& ids_out) {
    // Track ids 1..n assigned in a shuffled order so the subject is not always 1.
    std::vector<TrackId> ids(tracks.size());
    std::iota(ids.begin(), ids.end(), TrackId{1});
    std::shuffle(ids.begin(), ids.end(), rng_);
    ids_out = ids;

    DigitalTwin twin;
    twin.video_id = video_id;
    twin.fps = 2.0;
    twin.width = spec_.width;
    twin.height = spec_.height;
    for (std::size_t f = 0; f < spec_.frames_per_video; ++f) {
      FrameRecord frame;
      frame.frame_index = f;
      frame.timestamp_s = static_cast<double>(f) / twin.fps;
      for (std::size_t t = 0; t < tracks.size(); ++t) {
        InstanceRecord inst;
        inst.instance_id = ids[t];
        inst.category = tracks[t].category;
        inst.attributes = tracks[t].attributes;
        inst.mask_ref = video_id + "/" + std::to_string(ids[t]) + "_" + std::to_string(f) + ".rle";
        inst.spatial = jitter(tracks[t].base);
        frame.instances.push_back(std::move(inst));
      }
      std::sort(frame.instances.begin(), frame.instances.end(),
                [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
      twin.frames.push_back(std::move(frame));
    }
    return twin;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  SpatialProps jitter(const SpatialProps& s) {
    auto j = [this](double v, double lo) { return std::clamp(v + uniform(-0.02, 0.02), lo, 1.0); };
    // Rounded to 1e-4 so documents stay compact.
    auto r = [](double v) { return std::round(v * 1e4) / 1e4; };
    return {r(j(s.x, 0.0)), r(j(s.y, 0.0)), r(j(s.depth, 0.0)), r(std::clamp(s.size, 0.001, 1.0))};
  }

  const SyntheticSpec& spec_;
  std::mt19937_64 rng_;
};

MaskBitmap render_mask(const SpatialProps& s, std::uint32_t w, std::uint32_t h) {
  MaskBitmap m(w, h);
  const double area = s.size * static_cast<double>(w) * static_cast<double>(h);
  const long side = std::max(1L, std::lround(std::sqrt(area)));
  const long cx = std::lround(s.x * (w - 1)), cy = std::lround(s.y * (h - 1));
  const long x0 = std::clamp(cx - side / 2, 0L, static_cast<long>(w) - 1);
  const long y0 = std::clamp(cy - side / 2, 0L, static_cast<long>(h) - 1);
  const long x1 = std::min(static_cast<long>(w), x0 + side);
  const long y1 = std::min(static_cast<long>(h), y0 + side);
  for (long y = y0; y < y1; ++y) {
    for (long x = x0; x < x1; ++x) m.set(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
  }
  return m;
}

std::string fill_template(std::string text, const QueryCombination& c) {
  auto replace = [&text](const std::string& from, const std::string& to) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
      text.replace(pos, from.size(), to);
    }
  };
  replace("{A}", c.attribute);
  replace("{S}", c.subject_category);
  replace("{W}", std::string(predicate_words(c.predicate)));
  replace("{R}", c.reference_category);
  return text;
}

std::string padded(std::size_t n, int width) {
  std::string s = std::to_string(n);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

void generate_synthetic(const SyntheticSpec& spec, const fs::path& out) {
  spec.validate();
  if (fs::exists(out) && !fs::is_empty(out)) {
    throw Error(ErrorKind::kIo, "output directory " + out.string() + " is not empty");
  }
  Generator gen(spec);
  const std::size_t annotated = spec.video_count - spec.distractor_count;

  // Distinct query combinations, one per annotated video.
  std::vector<QueryCombination> space;
  for (const auto& s : spec.categories) {
    for (const auto& a : spec.attributes) {
      for (Predicate p : kSyntheticPredicates) {
        for (const auto& r : spec.categories) {
          if (r != s) space.push_back({s, a, p, r});
        }
      }
    }
  }
  if (space.size() < annotated) {
    throw Error(ErrorKind::kGeneration, "vocabulary yields " + std::to_string(space.size()) +
                                            " combinations for " + std::to_string(annotated) +
                                            " annotated videos");
  }
  std::vector<QueryCombination> combos;
  std::sample(space.begin(), space.end(), std::back_inserter(combos), annotated, gen.rng());
  std::shuffle(combos.begin(), combos.end(), gen.rng());

  // Role per video slot: index into combos, or npos for a distractor.
  std::vector<std::size_t> roles(spec.video_count, static_cast<std::size_t>(-1));
  std::iota(roles.begin(), roles.begin() + static_cast<std::ptrdiff_t>(annotated), std::size_t{0});
  std::shuffle(roles.begin(), roles.end(), gen.rng());

  const int id_width = std::max(3, static_cast<int>(std::to_string(spec.video_count).size()));
  std::vector<DigitalTwin> twins;
  std::vector<std::string> combo_video(annotated);
  std::vector<std::pair<TrackId, TrackId>> combo_tracks(annotated);  // (subject, reference)
  constexpr int kMaxAttempts = 64;

  for (std::size_t v = 0; v < spec.video_count; ++v) {
    const std::string video_id = "vid" + padded(v + 1, id_width);
    const std::size_t role = roles[v];
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      auto tracks = role != static_cast<std::size_t>(-1) ? gen.annotated_tracks(combos[role])
                                                         : gen.distractor_tracks(gen.choose(combos));
      std::vector<TrackId> ids;
      DigitalTwin twin = gen.realize(video_id, std::move(tracks), ids);
      bool ok = true;
      for (std::size_t c = 0; c < combos.size() && ok; ++c) {
        ok = satisfies_combination(twin, combos[c]) == (c == role);
      }
      if (!ok) continue;
      if (role != static_cast<std::size_t>(-1)) {
        combo_video[role] = video_id;
        combo_tracks[role] = {ids[0], ids[1]};
      }
      twins.push_back(std::move(twin));
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorKind::kGeneration, "could not build " + video_id + " without violating query "
                                          "uniqueness after " + std::to_string(kMaxAttempts) +
                                          " attempts; enlarge the vocabulary");
    }
  }

  BenchmarkManifest manifest;
  manifest.name = "synthetic-seed" + std::to_string(spec.seed);
  manifest.declared_video_count = spec.video_count;
  manifest.declared_query_count = spec.query_count;

  const fs::path fixtures = out / manifest.fixtures_dir;
  const int q_width = std::max(4, static_cast<int>(std::to_string(spec.query_count).size()));
  for (std::size_t q = 0; q < spec.query_count; ++q) {
    const std::size_t c = q % annotated;
    const std::size_t variant = q / annotated;
    const QueryCombination& combo = combos[c];
    std::string text = fill_template(kTemplates[variant % kTemplates.size()], combo);
    if (variant >= kTemplates.size()) text += " (take " + std::to_string(variant / kTemplates.size() + 1) + ")";

    const auto [subject, reference] = combo_tracks[c];
    QueryEntry e;
    e.query_id = "q" + padded(q + 1, q_width);
    e.text = text;
    e.gt_video_id = combo_video[c];
    e.gt_object_ids = {subject};
    e.combination = combo;
    e.decomposition_fixture =
        fs::relative(FixtureLlmClient::fixture_path(fixtures, kDecomposeSchema, text), out)
            .generic_string();

    const std::string words(predicate_words(combo.predicate));
    const json decomposition = json::array(
        {{{"text", combo.attribute + " " + combo.subject_category}, {"kind", "attribute"}},
         {{"text", combo.subject_category + " " + words + " " + combo.reference_category},
          {"kind", "spatial"}}});
    write_llm_fixture(fixtures, kDecomposeSchema, text, json::array({decomposition}));

    const json verdict = {
        {"action", "verdict"},
        {"verdict",
         {{"relevance", 0.9},
          {"trace", "instance " + std::to_string(subject) + " is a " + combo.attribute + " " +
                        combo.subject_category + " " + words + " the " +
                        combo.reference_category + " (instance " + std::to_string(reference) + ")"},
          {"object_ids", json::array({subject})}}}};
    json responses = json::array();
    if (q % 2 == 0) {
      responses.push_back(
          {{"action", "refine"},
           {"plan", {{"calls", json::array({{{"tool", "captioner"},
                                             {"instance_ids", json::array({subject})},
                                             {"params", json::object()}}})}}}});
    }
    responses.push_back(verdict);
    write_llm_fixture(fixtures, kReasonSchema, reasoning_key(text, e.gt_video_id), responses);
    manifest.queries.push_back(std::move(e));
  }

  const json fallback = {
      {"key", "*"},
      {"responses",
       json::array({{{"action", "verdict"},
                     {"verdict",
                      {{"relevance", 0.1},
                       {"trace", "no instance satisfies every condition"},
                       {"object_ids", json::array()}}}}})}};
  write_text_file(fixtures / "reasoner" / "default.json", canonical_json(fallback) + "\n");

  for (const auto& twin : twins) {
    write_text_file(out / manifest.twin_dir / (twin.video_id + ".json"), serialize_twin(twin));
    for (const auto& frame : twin.frames) {
      for (const auto& inst : frame.instances) {
        write_mask_file(out / manifest.mask_dir / inst.mask_ref,
                        render_mask(inst.spatial, twin.width, twin.height));
      }
    }
  }
  json manifest_doc = manifest_to_json(manifest);
  manifest_doc["synthetic"] = spec.to_json();
  write_text_file(out / "manifest.json", canonical_json(manifest_doc) + "\n");
  write_text_file(out / manifest.queries_file, canonical_json(queries_to_json(manifest.queries)) + "\n");
}

}  // namespace rt2v
