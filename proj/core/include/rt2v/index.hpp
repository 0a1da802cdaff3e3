#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rt2v/embedding.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

inline constexpr int kIndexFormatVersion = 1;
inline constexpr std::size_t kDefaultTopK = 10;

struct IndexEntry {
  ComponentDescriptor descriptor;
  EmbeddingVector vector;
};

struct IndexMetadata {
  std::string provider_id;
  std::string head_version;
  std::size_t dim = 0;
};

/// Immutable component store. Entries are held sorted by
/// (video_id, kind, key) with their vectors packed row-major in one buffer, so
/// scoring a video is a scan over a contiguous slab.
class ComponentIndex {
 public:
  ComponentIndex() = default;
  /// Validates (uniform dims, unique keys) and sorts; insertion order is
  /// irrelevant to every query result.
  ComponentIndex(IndexMetadata metadata, std::vector<IndexEntry> entries);

  const IndexMetadata& metadata() const { return metadata_; }
  std::size_t dim() const { return metadata_.dim; }
  std::size_t size() const { return descriptors_.size(); }
  bool empty() const { return descriptors_.empty(); }

  /// Ascending video ids.
  const std::vector<std::string>& video_ids() const { return video_ids_; }
  bool contains(std::string_view video_id) const;
  /// Half-open entry range [first, second) of a video; throws kNotFound.
  std::pair<std::size_t, std::size_t> video_range(std::string_view video_id) const;

  const ComponentDescriptor& descriptor(std::size_t i) const { return descriptors_[i]; }
  std::span<const double> row(std::size_t i) const {
    return {vectors_.data() + i * metadata_.dim, metadata_.dim};
  }

  json to_json() const;
  static ComponentIndex from_json(const json& doc);
  void save(const std::filesystem::path& path) const;
  static ComponentIndex load(const std::filesystem::path& path);

 private:
  IndexMetadata metadata_;
  std::vector<ComponentDescriptor> descriptors_;
  std::vector<double> vectors_;
  std::vector<std::string> video_ids_;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> ranges_;
};

/// One object entry per track and one relation entry per tuple, embedded in
/// batches and projected through the matching twin head.
ComponentIndex build_index(const std::vector<DigitalTwin>& twins, const RelationMap& relations,
                           EmbeddingProvider& provider, const HeadSet& heads,
                           std::size_t batch_size = 64);

/// The component texts build_index embeds, in index order.
std::vector<ComponentDescriptor> enumerate_components(const std::vector<DigitalTwin>& twins,
                                                      const RelationMap& relations);

struct AggregationSpec {
  enum class Mode { kWeightedMean, kMin };
  Mode mode = Mode::kWeightedMean;
  std::vector<double> weights;  // empty means uniform; normalized before use

  /// Effective weights for L sub-queries (sums to 1).
  std::vector<double> normalized_weights(std::size_t count) const;
};

std::string_view aggregation_name(AggregationSpec::Mode mode);
AggregationSpec::Mode parse_aggregation(std::string_view name);

struct SubQueryMatch {
  std::string component_key;
  ComponentKind kind = ComponentKind::kObject;
  double similarity = 0.0;
};

struct CoarseCandidate {
  std::string video_id;
  double score = 0.0;
  std::vector<SubQueryMatch> best;  // one per sub-query
};

/// Per sub-query maximum dot product over the video's components, aggregated
/// by weighted mean or minimum.
CoarseCandidate compositional_score(const ComponentIndex& index, std::string_view video_id,
                                    std::span<const EmbeddingVector> subqueries,
                                    const AggregationSpec& agg);

/// Every video scored, ordered by descending score then ascending video_id.
std::vector<CoarseCandidate> rank_all(const ComponentIndex& index,
                                      std::span<const EmbeddingVector> subqueries,
                                      const AggregationSpec& agg);

/// The first min(k, N) entries of rank_all.
std::vector<CoarseCandidate> retrieve_topk(const ComponentIndex& index,
                                           std::span<const EmbeddingVector> subqueries,
                                           const AggregationSpec& agg,
                                           std::size_t k = kDefaultTopK);

}  // namespace rt2v
