#pragma once

#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rt2v/json_util.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

inline constexpr std::size_t kDefaultEmbeddingDim = 256;

/// Unit-norm real vector. Construction normalizes; the invariant
/// |v| = 1 (within 1e-6) holds for every live value.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// L2-normalizes `raw`; throws kInvalidArgument on a zero or non-finite input.
  static EmbeddingVector normalized(std::vector<double> raw);
  /// Adopts values that are already unit norm (checked within 1e-6).
  static EmbeddingVector from_unit(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  return dot(a.values(), b.values());
}

enum class ComponentKind { kObject, kRelation };
std::string_view component_kind_name(ComponentKind kind);
ComponentKind parse_component_kind(std::string_view name);

struct ComponentDescriptor {
  std::string video_id;
  ComponentKind kind = ComponentKind::kObject;
  std::string key;  // track id, or "subject:predicate:object"
  std::string rendered_text;

  bool operator==(const ComponentDescriptor&) const = default;
};

std::string relation_key(const RelationTuple& t);

/// Maps texts to unit vectors. Implementations are deterministic for a fixed
/// configuration and keep dim() constant. Providers that cannot serve
/// concurrent calls return true from single_flight(); embed() then serializes.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
  virtual bool single_flight() const { return false; }

  /// Same order and length as `texts`.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);
  EmbeddingVector embed_one(const std::string& text);

 protected:
  virtual std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) = 0;

 private:
  std::mutex flight_;
};

/// Lowercased ASCII-alphanumeric tokens; bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing (FNV-1a 64) over tokens, L2-normalized. Text with no
/// tokens maps to the basis vector e_0.
EmbeddingVector hash_embed(std::string_view text, std::size_t dim);

class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = kDefaultEmbeddingDim);

  std::size_t dim() const override { return dim_; }
  std::string id() const override { return "hash-fnv1a64/" + std::to_string(dim_); }

 protected:
  std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

/// `<category>; <attributes>; <h> <v>; depth <d>; size <s>` from per-track
/// means; an empty attribute list drops its segment.
std::string render_object_text(const DigitalTwin& twin, TrackId track);
std::string_view predicate_words(Predicate p);
std::string render_relation_text(const RelationTuple& tuple, const DigitalTwin& twin);

/// Linear head W (out_dim x in_dim, row-major) followed by L2 normalization.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t out_dim, std::size_t in_dim, std::vector<double> weights);

  static ProjectionHead identity(std::size_t dim);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }
  double at(std::size_t row, std::size_t col) const { return weights_[row * in_dim_ + col]; }

  /// W * x without normalization.
  std::vector<double> multiply(std::span<const double> x) const;

  json to_json() const;
  static ProjectionHead from_json(const json& doc);

  bool operator==(const ProjectionHead&) const = default;

 private:
  std::size_t out_dim_ = 0;
  std::size_t in_dim_ = 0;
  std::vector<double> weights_;
};

EmbeddingVector apply_projection(const EmbeddingVector& vec, const ProjectionHead& head);

/// Query head plus one twin head per component kind.
struct HeadSet {
  ProjectionHead query;
  ProjectionHead object;
  ProjectionHead relation;

  static HeadSet identity(std::size_t dim);
  const ProjectionHead& twin_head(ComponentKind kind) const {
    return kind == ComponentKind::kObject ? object : relation;
  }
  ProjectionHead& twin_head(ComponentKind kind) {
    return kind == ComponentKind::kObject ? object : relation;
  }
  /// Content hash of the three weight matrices.
  std::string version() const;

  bool operator==(const HeadSet&) const = default;
};

}  // namespace rt2v
