#include "rt2v/index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "rt2v/error.hpp"

namespace rt2v {

namespace {

auto entry_order(const ComponentDescriptor& d) { return std::tie(d.video_id, d.kind, d.key); }

}  // namespace

ComponentIndex::ComponentIndex(IndexMetadata metadata, std::vector<IndexEntry> entries)
    : metadata_(std::move(metadata)) {
  if (metadata_.dim == 0) throw Error(ErrorKind::kInvalidArgument, "index dim must be positive");
  std::sort(entries.begin(), entries.end(), [](const IndexEntry& a, const IndexEntry& b) {
    return entry_order(a.descriptor) < entry_order(b.descriptor);
  });

  descriptors_.reserve(entries.size());
  vectors_.reserve(entries.size() * metadata_.dim);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.vector.dim() != metadata_.dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "entry " + e.descriptor.video_id + "/" + e.descriptor.key + " has dim " +
                      std::to_string(e.vector.dim()) + ", index dim " +
                      std::to_string(metadata_.dim));
    }
    if (i > 0 && entry_order(entries[i - 1].descriptor) == entry_order(e.descriptor)) {
      throw Error(ErrorKind::kDuplicateId, "duplicate component " + e.descriptor.video_id + "/" +
                                               std::string(component_kind_name(e.descriptor.kind)) +
                                               "/" + e.descriptor.key);
    }
    auto values = e.vector.values();
    vectors_.insert(vectors_.end(), values.begin(), values.end());
    descriptors_.push_back(e.descriptor);

    auto [it, inserted] = ranges_.try_emplace(e.descriptor.video_id, i, i + 1);
    if (inserted) {
      video_ids_.push_back(e.descriptor.video_id);
    } else {
      it->second.second = i + 1;
    }
  }
}

bool ComponentIndex::contains(std::string_view video_id) const {
  return ranges_.find(video_id) != ranges_.end();
}

std::pair<std::size_t, std::size_t> ComponentIndex::video_range(std::string_view video_id) const {
  auto it = ranges_.find(video_id);
  if (it == ranges_.end()) {
    throw Error(ErrorKind::kNotFound, "video \"" + std::string(video_id) + "\" is not indexed");
  }
  return it->second;
}

json ComponentIndex::to_json() const {
  json entries = json::array();
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    const auto& d = descriptors_[i];
    auto r = row(i);
    entries.push_back({{"video_id", d.video_id},
                       {"kind", component_kind_name(d.kind)},
                       {"key", d.key},
                       {"text", d.rendered_text},
                       {"vector", std::vector<double>(r.begin(), r.end())}});
  }
  return {{"format_version", kIndexFormatVersion},
          {"provider", metadata_.provider_id},
          {"head_version", metadata_.head_version},
          {"dim", metadata_.dim},
          {"entries", std::move(entries)}};
}

ComponentIndex ComponentIndex::from_json(const json& doc) {
  const auto version = require_unsigned(doc, "format_version", "index");
  if (version != kIndexFormatVersion) {
    throw Error(ErrorKind::kMalformedJson,
                "unsupported index format_version " + std::to_string(version));
  }
  IndexMetadata meta{require_string(doc, "provider", "index"),
                     require_string(doc, "head_version", "index"),
                     require_unsigned(doc, "dim", "index")};
  std::vector<IndexEntry> entries;
  for (const json& e : require_array(doc, "entries", "index")) {
    ComponentDescriptor d{require_string(e, "video_id", "entry"),
                          parse_component_kind(require_string(e, "kind", "entry")),
                          require_string(e, "key", "entry"), require_string(e, "text", "entry")};
    std::vector<double> values;
    for (const json& v : require_array(e, "vector", "entry")) {
      if (!v.is_number()) throw Error(ErrorKind::kMalformedJson, "entry.vector must hold numbers");
      values.push_back(v.get<double>());
    }
    entries.push_back({std::move(d), EmbeddingVector::from_unit(std::move(values))});
  }
  return ComponentIndex(std::move(meta), std::move(entries));
}

void ComponentIndex::save(const std::filesystem::path& path) const {
  write_text_file(path, canonical_json(to_json()));
}

ComponentIndex ComponentIndex::load(const std::filesystem::path& path) {
  return from_json(parse_json(read_text_file(path)));
}

std::vector<ComponentDescriptor> enumerate_components(const std::vector<DigitalTwin>& twins,
                                                      const RelationMap& relations) {
  std::vector<ComponentDescriptor> out;
  for (const auto& twin : twins) {
    for (TrackId track : twin.track_ids()) {
      out.push_back({twin.video_id, ComponentKind::kObject, std::to_string(track),
                     render_object_text(twin, track)});
    }
    auto it = relations.find(twin.video_id);
    if (it == relations.end()) continue;
    for (const auto& tuple : it->second) {
      out.push_back({twin.video_id, ComponentKind::kRelation, relation_key(tuple),
                     render_relation_text(tuple, twin)});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return entry_order(a) < entry_order(b);
  });
  return out;
}

ComponentIndex build_index(const std::vector<DigitalTwin>& twins, const RelationMap& relations,
                           EmbeddingProvider& provider, const HeadSet& heads,
                           std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorKind::kInvalidArgument, "batch size must be positive");
  for (const auto* head : {&heads.object, &heads.relation}) {
    if (head->in_dim() != provider.dim()) {
      throw Error(ErrorKind::kDimensionMismatch, "twin head in_dim " +
                                                     std::to_string(head->in_dim()) +
                                                     " != provider dim " +
                                                     std::to_string(provider.dim()));
    }
  }
  if (heads.object.out_dim() != heads.relation.out_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "object and relation heads disagree on out_dim");
  }
  for (const auto& twin : twins) {
    if (twin.track_ids().empty()) {
      throw Error(ErrorKind::kInvariantViolation,
                  "video \"" + twin.video_id + "\" has no components to index");
    }
  }

  std::vector<ComponentDescriptor> components = enumerate_components(twins, relations);
  std::vector<IndexEntry> entries;
  entries.reserve(components.size());
  const std::size_t batches = (components.size() + batch_size - 1) / batch_size;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(components.size(), begin + batch_size);
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i) texts.push_back(components[i].rendered_text);
    std::vector<EmbeddingVector> raw;
    try {
      raw = provider.embed(texts);
    } catch (const Error& e) {
      throw Error(ErrorKind::kProvider, "index build aborted: embedding batch " +
                                            std::to_string(b) + " (components " +
                                            std::to_string(begin) + ".." +
                                            std::to_string(end - 1) + ") failed: " + e.what());
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto& head = heads.twin_head(components[i].kind);
      entries.push_back({std::move(components[i]), apply_projection(raw[i - begin], head)});
    }
  }
  return ComponentIndex({provider.id(), heads.version(), heads.object.out_dim()},
                        std::move(entries));
}

std::vector<double> AggregationSpec::normalized_weights(std::size_t count) const {
  if (weights.empty()) return std::vector<double>(count, 1.0 / static_cast<double>(count));
  if (weights.size() != count) {
    throw Error(ErrorKind::kInvalidArgument, "aggregation has " + std::to_string(weights.size()) +
                                                 " weights for " + std::to_string(count) +
                                                 " sub-queries");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(std::isfinite(w) && w > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "aggregation weights must be positive");
    }
    total += w;
  }
  std::vector<double> out(weights);
  for (double& w : out) w /= total;
  return out;
}

std::string_view aggregation_name(AggregationSpec::Mode mode) {
  return mode == AggregationSpec::Mode::kMin ? "min" : "weighted_mean";
}

AggregationSpec::Mode parse_aggregation(std::string_view name) {
  if (name == "weighted_mean") return AggregationSpec::Mode::kWeightedMean;
  if (name == "min") return AggregationSpec::Mode::kMin;
  throw Error(ErrorKind::kInvalidArgument, "unknown aggregation \"" + std::string(name) + "\"");
}

namespace {

void check_subqueries(const ComponentIndex& index, std::span<const EmbeddingVector> subqueries) {
  if (subqueries.empty()) throw Error(ErrorKind::kInvalidArgument, "no sub-queries to score");
  for (const auto& q : subqueries) {
    if (q.dim() != index.dim()) {
      throw Error(ErrorKind::kDimensionMismatch, "sub-query dim " + std::to_string(q.dim()) +
                                                     " != index dim " +
                                                     std::to_string(index.dim()));
    }
  }
}

CoarseCandidate score_video(const ComponentIndex& index, std::string_view video_id,
                            std::span<const EmbeddingVector> subqueries,
                            const AggregationSpec& agg, std::span<const double> weights) {
  const auto [begin, end] = index.video_range(video_id);
  CoarseCandidate c;
  c.video_id = std::string(video_id);
  c.best.reserve(subqueries.size());
  for (const auto& q : subqueries) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = begin;
    for (std::size_t i = begin; i < end; ++i) {
      const double s = dot(q.values(), index.row(i));
      if (s > best) {
        best = s;
        arg = i;
      }
    }
    const auto& d = index.descriptor(arg);
    c.best.push_back({d.key, d.kind, best});
  }

  if (agg.mode == AggregationSpec::Mode::kMin) {
    c.score = std::numeric_limits<double>::infinity();
    for (const auto& m : c.best) c.score = std::min(c.score, m.similarity);
  } else {
    c.score = 0.0;
    for (std::size_t l = 0; l < c.best.size(); ++l) c.score += weights[l] * c.best[l].similarity;
  }
  return c;
}

}  // namespace

CoarseCandidate compositional_score(const ComponentIndex& index, std::string_view video_id,
                                    std::span<const EmbeddingVector> subqueries,
                                    const AggregationSpec& agg) {
  check_subqueries(index, subqueries);
  const auto weights = agg.normalized_weights(subqueries.size());
  return score_video(index, video_id, subqueries, agg, weights);
}

std::vector<CoarseCandidate> rank_all(const ComponentIndex& index,
                                      std::span<const EmbeddingVector> subqueries,
                                      const AggregationSpec& agg) {
  if (index.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot retrieve from an empty index");
  check_subqueries(index, subqueries);
  const auto weights = agg.normalized_weights(subqueries.size());
  std::vector<CoarseCandidate> out;
  out.reserve(index.video_ids().size());
  for (const auto& vid : index.video_ids()) {
    out.push_back(score_video(index, vid, subqueries, agg, weights));
  }
  std::sort(out.begin(), out.end(), [](const CoarseCandidate& a, const CoarseCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.video_id < b.video_id;
  });
  return out;
}

std::vector<CoarseCandidate> retrieve_topk(const ComponentIndex& index,
                                           std::span<const EmbeddingVector> subqueries,
                                           const AggregationSpec& agg, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "K must be >= 1");
  auto all = rank_all(index, subqueries, agg);
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace rt2v
