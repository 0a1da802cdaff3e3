#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rt2v/json_util.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

/// The symbolic condition a synthetic query encodes: some track of
/// `subject_category` carrying `attribute` stands in `predicate` relation to
/// some track of `reference_category`.
struct QueryCombination {
  std::string subject_category;
  std::string attribute;
  Predicate predicate = Predicate::kLeftOf;
  std::string reference_category;

  bool operator==(const QueryCombination&) const = default;
  json to_json() const;
  static QueryCombination from_json(const json& doc);
};

struct QueryEntry {
  std::string query_id;
  std::string text;
  std::string gt_video_id;
  std::vector<TrackId> gt_object_ids;
  std::optional<std::string> decomposition_fixture;  // path relative to the benchmark root
  std::optional<QueryCombination> combination;       // synthetic benchmarks only
};

struct BenchmarkManifest {
  std::string name;
  std::string twin_dir = "twins";
  std::string mask_dir = "masks";
  std::string queries_file = "queries.json";
  std::string fixtures_dir = "fixtures";
  std::optional<std::size_t> declared_video_count;
  std::optional<std::size_t> declared_query_count;
  std::vector<QueryEntry> queries;
};

struct Benchmark {
  std::filesystem::path root;
  BenchmarkManifest manifest;
  std::vector<DigitalTwin> twins;  // ascending video_id

  const DigitalTwin* find(std::string_view video_id) const;
  std::filesystem::path twin_dir() const { return root / manifest.twin_dir; }
  std::filesystem::path mask_dir() const { return root / manifest.mask_dir; }
  std::filesystem::path fixtures_dir() const { return root / manifest.fixtures_dir; }
  std::filesystem::path mask_path(std::string_view mask_ref) const { return mask_dir() / mask_ref; }
};

/// Layout: manifest.json, <queries_file>, <twin_dir>/<video_id>.json,
/// <mask_dir>/<video_id>/<instance>_<frame>.rle, <fixtures_dir>/{decompositions,reasoner}/.
/// Read-only. Raises kMissingTwin, kDanglingReference, kDuplicateId or
/// kCountMismatch naming the offender.
Benchmark load_benchmark(const std::filesystem::path& root);

json manifest_to_json(const BenchmarkManifest& manifest);
json queries_to_json(const std::vector<QueryEntry>& queries);

bool satisfies_combination(const DigitalTwin& twin, const QueryCombination& combo,
                           const RelationConfig& cfg = {});

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t video_count = 20;  // distractors included
  std::size_t distractor_count = 10;
  std::size_t min_tracks = 3;
  std::size_t max_tracks = 5;
  std::size_t query_count = 10;
  std::size_t frames_per_video = 3;
  std::uint32_t width = 64;
  std::uint32_t height = 48;
  std::vector<std::string> categories = {"cat",  "dog",   "ball",  "table", "chair", "bird",
                                         "car",  "bike",  "person", "box",  "lamp",  "plant"};
  std::vector<std::string> attributes = {"orange", "black", "white",  "striped", "red",
                                         "blue",   "green", "fluffy", "wooden",  "shiny"};

  void validate() const;
  json to_json() const;
};

/// Writes a complete benchmark (twins, masks, queries, decomposition and
/// scripted reasoner fixtures) into `out`, which must be absent or empty.
/// Output is a pure function of `spec`.
void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace rt2v
