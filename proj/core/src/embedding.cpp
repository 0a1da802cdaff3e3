#include "rt2v/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "rt2v/error.hpp"

namespace rt2v {

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  if (raw.empty() || !std::isfinite(sq) || sq == 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "cannot normalize a zero or non-finite vector");
  }
  const double norm = std::sqrt(sq);
  for (double& v : raw) v /= norm;
  return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "non-finite embedding entry");
    sq += v * v;
  }
  if (values.empty() || std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
    throw Error(ErrorKind::kInvariantViolation, "embedding is not unit norm");
  }
  return EmbeddingVector(std::move(values));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "dot product of vectors with different dims");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string_view component_kind_name(ComponentKind kind) {
  return kind == ComponentKind::kObject ? "object" : "relation";
}

ComponentKind parse_component_kind(std::string_view name) {
  if (name == "object") return ComponentKind::kObject;
  if (name == "relation") return ComponentKind::kRelation;
  throw Error(ErrorKind::kMalformedJson, "unknown component kind \"" + std::string(name) + "\"");
}

std::string relation_key(const RelationTuple& t) {
  return std::to_string(t.subject_id) + ":" + std::string(predicate_name(t.predicate)) + ":" +
         std::to_string(t.object_id);
}

std::vector<EmbeddingVector> EmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  if (single_flight()) {
    std::lock_guard lock(flight_);
    out = embed_texts(texts);
  } else {
    out = embed_texts(texts);
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorKind::kProvider, "provider " + id() + " returned " +
                                          std::to_string(out.size()) + " vectors for " +
                                          std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.dim() != dim()) {
      throw Error(ErrorKind::kDimensionMismatch, "provider " + id() + " returned dim " +
                                                     std::to_string(v.dim()));
    }
  }
  return out;
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) {
  return embed(std::span<const std::string>(&text, 1)).front();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector hash_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) throw Error(ErrorKind::kInvalidArgument, "hash_embed requires dim >= 8");
  std::vector<double> acc(dim, 0.0);
  bool any = false;
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = fnv1a64(token);
    acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    any = true;
  }
  const bool all_zero = std::all_of(acc.begin(), acc.end(), [](double v) { return v == 0.0; });
  if (!any || all_zero) {
    std::vector<double> basis(dim, 0.0);
    basis[0] = 1.0;
    return EmbeddingVector::from_unit(std::move(basis));
  }
  return EmbeddingVector::normalized(std::move(acc));
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim < 8) throw Error(ErrorKind::kInvalidArgument, "hash provider requires dim >= 8");
}

std::vector<EmbeddingVector> HashEmbeddingProvider::embed_texts(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embed(t, dim_));
  return out;
}

namespace {

const char* thirds(double v, const char* low, const char* mid, const char* high) {
  if (v < 1.0 / 3.0) return low;
  if (v < 2.0 / 3.0) return mid;
  return high;
}

const char* size_bucket(double size) {
  if (size < 0.05) return "small";
  if (size < 0.25) return "medium";
  return "large";
}

const InstanceRecord* first_occurrence(const DigitalTwin& twin, TrackId track) {
  for (const auto& frame : twin.frames) {
    if (const auto* inst = frame.find(track)) return inst;
  }
  return nullptr;
}

std::string category_of(const DigitalTwin& twin, TrackId track) {
  const auto* inst = first_occurrence(twin, track);
  if (inst == nullptr) {
    throw Error(ErrorKind::kNotFound, "twin \"" + twin.video_id + "\" has no track " +
                                          std::to_string(track));
  }
  return inst->category;
}

}  // namespace

std::string render_object_text(const DigitalTwin& twin, TrackId track) {
  const std::string category = category_of(twin, track);

  double sx = 0, sy = 0, sd = 0, ss = 0;
  std::size_t n = 0;
  std::vector<std::string> attributes;
  for (const auto& frame : twin.frames) {
    const auto* inst = frame.find(track);
    if (inst == nullptr) continue;
    sx += inst->spatial.x;
    sy += inst->spatial.y;
    sd += inst->spatial.depth;
    ss += inst->spatial.size;
    ++n;
    for (const auto& a : inst->attributes) {
      if (std::find(attributes.begin(), attributes.end(), a) == attributes.end()) {
        attributes.push_back(a);
      }
    }
  }
  const double count = static_cast<double>(n);
  const double mx = sx / count, my = sy / count, md = sd / count, ms = ss / count;

  std::string out = category;
  out += "; ";
  for (const auto& a : attributes) {
    out += a;
    out += "; ";
  }
  out += thirds(mx, "left", "center", "right");
  out += ' ';
  out += thirds(my, "top", "middle", "bottom");
  out += "; depth ";
  out += thirds(md, "near", "mid", "far");
  out += "; size ";
  out += size_bucket(ms);
  return out;
}

std::string_view predicate_words(Predicate p) {
  switch (p) {
    case Predicate::kLeftOf: return "to the left of";
    case Predicate::kRightOf: return "to the right of";
    case Predicate::kAbove: return "above";
    case Predicate::kBelow: return "below";
    case Predicate::kInFrontOf: return "in front of";
    case Predicate::kBehind: return "behind";
    case Predicate::kLargerThan: return "larger than";
    case Predicate::kNear: return "near";
    case Predicate::kApproaching: return "approaching";
    case Predicate::kReceding: return "receding from";
  }
  return "";
}

std::string render_relation_text(const RelationTuple& tuple, const DigitalTwin& twin) {
  return category_of(twin, tuple.subject_id) + " " + std::string(predicate_words(tuple.predicate)) +
         " " + category_of(twin, tuple.object_id);
}

ProjectionHead::ProjectionHead(std::size_t out_dim, std::size_t in_dim, std::vector<double> weights)
    : out_dim_(out_dim), in_dim_(in_dim), weights_(std::move(weights)) {
  if (out_dim == 0 || in_dim == 0) {
    throw Error(ErrorKind::kInvalidArgument, "projection head dims must be positive");
  }
  if (weights_.size() != out_dim * in_dim) {
    throw Error(ErrorKind::kDimensionMismatch, "projection weights do not match out_dim x in_dim");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw Error(ErrorKind::kInvalidArgument, "non-finite projection weight");
  }
}

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  std::vector<double> w(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
  return ProjectionHead(dim, dim, std::move(w));
}

std::vector<double> ProjectionHead::multiply(std::span<const double> x) const {
  if (x.size() != in_dim_) {
    throw Error(ErrorKind::kDimensionMismatch, "projection expects dim " + std::to_string(in_dim_) +
                                                   ", got " + std::to_string(x.size()));
  }
  std::vector<double> out(out_dim_, 0.0);
  for (std::size_t r = 0; r < out_dim_; ++r) {
    const double* row = weights_.data() + r * in_dim_;
    double s = 0.0;
    for (std::size_t c = 0; c < in_dim_; ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

json ProjectionHead::to_json() const {
  return {{"in_dim", in_dim_}, {"out_dim", out_dim_}, {"W", weights_}};
}

ProjectionHead ProjectionHead::from_json(const json& doc) {
  const auto in_dim = require_unsigned(doc, "in_dim", "head");
  const auto out_dim = require_unsigned(doc, "out_dim", "head");
  std::vector<double> w;
  for (const json& v : require_array(doc, "W", "head")) {
    if (!v.is_number()) throw Error(ErrorKind::kMalformedJson, "head.W must hold numbers");
    w.push_back(v.get<double>());
  }
  return ProjectionHead(out_dim, in_dim, std::move(w));
}

EmbeddingVector apply_projection(const EmbeddingVector& vec, const ProjectionHead& head) {
  if (vec.dim() != head.in_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "head in_dim " + std::to_string(head.in_dim()) +
                                                   " != vector dim " + std::to_string(vec.dim()));
  }
  return EmbeddingVector::normalized(head.multiply(vec.values()));
}

HeadSet HeadSet::identity(std::size_t dim) {
  return {ProjectionHead::identity(dim), ProjectionHead::identity(dim),
          ProjectionHead::identity(dim)};
}

std::string HeadSet::version() const {
  return fnv1a64_hex(canonical_json(
      {{"query", query.to_json()}, {"object", object.to_json()}, {"relation", relation.to_json()}}));
}

}  // namespace rt2v
