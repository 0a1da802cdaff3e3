#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rt2v/embedding.hpp"
#include "rt2v/index.hpp"

namespace rt2v {

struct TrainConfig {
  double temperature = 0.07;
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double init_noise = 1e-3;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& doc);
};

struct TrainingComponent {
  ComponentKind kind = ComponentKind::kObject;
  std::string text;
};

/// Positives and negatives index TrainingDataset::components.
struct TrainingExample {
  std::string subquery_text;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

struct TrainingDataset {
  std::vector<TrainingComponent> components;
  std::vector<TrainingExample> examples;

  /// Non-empty positives, in-range refs, negatives disjoint from positives.
  void validate() const;
};

/// -log( sum_P exp(q.p/t) / (sum_P exp(q.p/t) + sum_N exp(q.n/t)) ), evaluated
/// with a max-shift for stability.
double nce_loss(const EmbeddingVector& query, std::span<const EmbeddingVector> positives,
                std::span<const EmbeddingVector> negatives, double temperature);

/// A training example after the frozen provider has embedded its texts; the
/// vectors are the inputs to the projection heads.
struct RawComponent {
  ComponentKind kind = ComponentKind::kObject;
  std::vector<double> x;
};

struct RawExample {
  std::vector<double> query;
  std::vector<RawComponent> positives;
  std::vector<RawComponent> negatives;
};

/// Row-major gradients shaped like the corresponding head weights.
struct HeadGradients {
  std::vector<double> query;
  std::vector<double> object;
  std::vector<double> relation;
  double loss = 0.0;
};

/// Summed loss over the batch with every vector projected and normalized.
double batch_loss(std::span<const RawExample> batch, const HeadSet& heads, double temperature);

/// Analytic d(batch_loss)/dW for all three heads, including the Jacobian of
/// the post-projection normalization.
HeadGradients gradients(std::span<const RawExample> batch, const HeadSet& heads,
                        double temperature);

/// Identity heads perturbed by N(0, noise^2) entries drawn from `seed`.
HeadSet initial_heads(std::size_t dim, std::uint64_t seed, double noise = 1e-3);

struct TrainResult {
  HeadSet heads;
  std::vector<double> loss_trace;  // mean example loss per epoch
};

/// Plain mini-batch gradient descent. Deterministic for a fixed seed: the
/// same initialization, shuffle order and fixed-order gradient reduction.
TrainResult train_embedded(std::vector<RawExample> examples, std::size_t dim,
                           const TrainConfig& config);
TrainResult train(const TrainingDataset& dataset, EmbeddingProvider& provider,
                  const TrainConfig& config);

struct MiningQuery {
  std::string gt_video_id;
  std::vector<std::string> subquery_texts;
};

/// Pairs each sub-query with the components of its ground-truth video and
/// samples `negatives_per_positive` components per positive from other videos.
TrainingDataset mine_training_dataset(const std::vector<DigitalTwin>& twins,
                                      const RelationMap& relations,
                                      const std::vector<MiningQuery>& queries,
                                      std::size_t negatives_per_positive = 8,
                                      std::uint64_t seed = 0);

json heads_to_checkpoint(const HeadSet& heads, const TrainConfig& config);
HeadSet heads_from_checkpoint(const json& doc);
void save_heads(const std::filesystem::path& path, const HeadSet& heads, const TrainConfig& config);
HeadSet load_heads(const std::filesystem::path& path);

}  // namespace rt2v
