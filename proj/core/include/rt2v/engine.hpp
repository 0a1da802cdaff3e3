#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rt2v/bench_io.hpp"
#include "rt2v/decomposer.hpp"
#include "rt2v/embedding.hpp"
#include "rt2v/index.hpp"
#include "rt2v/metrics.hpp"
#include "rt2v/reasoner.hpp"

namespace rt2v {

std::string_view library_version();

struct EngineConfig {
  std::string benchmark;                 // benchmark root
  std::optional<std::string> index_path; // loaded when present, built from twins otherwise
  std::optional<std::string> heads_path; // identity heads when absent
  std::size_t k = kDefaultTopK;
  double tau = kDefaultTau;
  AggregationSpec::Mode aggregation = AggregationSpec::Mode::kWeightedMean;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t max_refinements = kDefaultMaxRefinements;
  int max_reasks = kDefaultReasks;

  // Offline operation: hashing embeddings, fixture LLM, frozen clock.
  bool fixture_mode = true;
  std::string fixtures_dir;  // defaults to the benchmark's fixture directory

  std::string embed_url;
  std::string embed_model = "text-embedding";
  std::string llm_url;
  std::string llm_model = "reasoner";
  std::string api_key;

  bool persist_enrichment = true;  // keep enriched twins for later queries
  bool write_back = false;         // also rewrite twin files on disk
  bool parallel_rerank = false;

  /// Fills endpoints and credentials from RT2V_EMBED_URL, RT2V_LLM_URL,
  /// RT2V_API_KEY and RT2V_FIXTURES when set.
  void apply_environment();
  void validate() const;
  /// Credentials are omitted.
  json to_json() const;
  /// Keys absent from `doc` keep the defaults.
  static EngineConfig from_json(const json& doc);
  static EngineConfig load(const std::filesystem::path& path);
};

struct StageTiming {
  double decompose_ms = 0.0;
  double coarse_ms = 0.0;
  double rerank_ms = 0.0;
};

struct RetrievalResponse {
  std::string query;
  std::size_t k = 0;
  double tau = 0.0;
  AggregationSpec::Mode aggregation = AggregationSpec::Mode::kWeightedMean;
  std::vector<SubQuery> subqueries;
  FinalRanking ranking;
  StageTiming timing;

  json to_json() const;
  std::string to_table() const;
};

/// A loaded benchmark, index and model stack. query() and evaluate() may be
/// called concurrently; enrichment persistence is the only mutable state.
class Engine {
 public:
  explicit Engine(EngineConfig config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const { return config_; }
  const Benchmark& benchmark() const { return benchmark_; }
  const ComponentIndex& index() const { return index_; }
  const HeadSet& heads() const { return heads_; }

  RetrievalResponse query(std::string_view text, std::optional<std::size_t> k = std::nullopt,
                          std::optional<double> tau = std::nullopt);
  /// Runs every benchmark query; `ks` are the R@K / AP@K cut-offs.
  MetricReport evaluate(std::span<const std::size_t> ks = kDefaultMetricKs);

  /// Current (possibly enriched) twin; throws kNotFound.
  DigitalTwin twin(std::string_view video_id) const;
  /// Canonical RLE text of one instance mask; throws kNotFound.
  std::string mask_rle(std::string_view video_id, TrackId instance, FrameIndex frame) const;
  json health() const;

 private:
  MaskSet load_masks(const DigitalTwin& twin, const std::vector<MaskTrack>& tracks) const;

  EngineConfig config_;
  Benchmark benchmark_;
  std::unique_ptr<EmbeddingProvider> provider_;
  std::unique_ptr<LlmClient> llm_;
  HeadSet heads_;
  ComponentIndex index_;
  ToolRegistry tools_;
  std::unique_ptr<TwinStore> store_;
};

}  // namespace rt2v
