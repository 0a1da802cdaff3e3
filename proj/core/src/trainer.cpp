#include "rt2v/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "rt2v/error.hpp"

namespace rt2v {

void TrainConfig::validate() const {
  if (!(std::isfinite(temperature) && temperature > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
  }
  if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "learning rate must be > 0");
  }
  if (batch_size == 0) throw Error(ErrorKind::kInvalidArgument, "batch size must be positive");
  if (!(std::isfinite(init_noise) && init_noise >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "init noise must be >= 0");
  }
}

json TrainConfig::to_json() const {
  return {{"temperature", temperature}, {"learning_rate", learning_rate},
          {"epochs", epochs},           {"batch_size", batch_size},
          {"seed", seed},               {"init_noise", init_noise}};
}

TrainConfig TrainConfig::from_json(const json& doc) {
  TrainConfig c;
  c.temperature = require_number(doc, "temperature", "config");
  c.learning_rate = require_number(doc, "learning_rate", "config");
  c.epochs = require_unsigned(doc, "epochs", "config");
  c.batch_size = require_unsigned(doc, "batch_size", "config");
  c.seed = require_unsigned(doc, "seed", "config");
  c.init_noise = require_number(doc, "init_noise", "config");
  return c;
}

void TrainingDataset::validate() const {
  if (examples.empty()) throw Error(ErrorKind::kInvalidArgument, "training dataset is empty");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::string where = "training example " + std::to_string(i);
    if (ex.positives.empty()) throw Error(ErrorKind::kInvalidArgument, where + " has no positives");
    std::set<std::size_t> pos(ex.positives.begin(), ex.positives.end());
    for (auto ref : ex.positives) {
      if (ref >= components.size()) {
        throw Error(ErrorKind::kDanglingReference, where + " positive ref out of range");
      }
    }
    for (auto ref : ex.negatives) {
      if (ref >= components.size()) {
        throw Error(ErrorKind::kDanglingReference, where + " negative ref out of range");
      }
      if (pos.count(ref) != 0) {
        throw Error(ErrorKind::kInvalidArgument, where + " has a negative that is also positive");
      }
    }
  }
}

double nce_loss(const EmbeddingVector& query, std::span<const EmbeddingVector> positives,
                std::span<const EmbeddingVector> negatives, double temperature) {
  if (positives.empty()) throw Error(ErrorKind::kInvalidArgument, "nce_loss needs a positive");
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");

  std::vector<double> logits;
  logits.reserve(positives.size() + negatives.size());
  for (const auto& p : positives) logits.push_back(dot(query, p) / temperature);
  for (const auto& n : negatives) logits.push_back(dot(query, n) / temperature);
  for (double s : logits) {
    if (!std::isfinite(s)) throw Error(ErrorKind::kInvalidArgument, "non-finite similarity");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  double pos_mass = 0.0;
  double all_mass = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double e = std::exp(logits[k] - shift);
    all_mass += e;
    if (k < positives.size()) pos_mass += e;
  }
  return std::log(all_mass) - std::log(pos_mass);
}

namespace {

struct Projected {
  std::vector<double> unit;
  double norm = 0.0;
};

Projected project(const ProjectionHead& head, std::span<const double> x) {
  Projected p{head.multiply(x), 0.0};
  double sq = 0.0;
  for (double v : p.unit) sq += v * v;
  p.norm = std::sqrt(sq);
  if (!(p.norm > 0.0) || !std::isfinite(p.norm)) {
    throw Error(ErrorKind::kDivergence, "projection collapsed to a zero or non-finite vector");
  }
  for (double& v : p.unit) v /= p.norm;
  return p;
}

// Accumulates (I - y y^T) g / |z| outer x into grad (row-major out x in).
void backprop_normalized(const Projected& y, std::span<const double> upstream,
                         std::span<const double> x, std::vector<double>& grad) {
  const double proj = dot(y.unit, upstream);
  const std::size_t in = x.size();
  for (std::size_t r = 0; r < y.unit.size(); ++r) {
    const double dz = (upstream[r] - y.unit[r] * proj) / y.norm;
    if (dz == 0.0) continue;
    double* row = grad.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) row[c] += dz * x[c];
  }
}

struct ExampleTerms {
  Projected query;
  std::vector<Projected> components;  // positives then negatives
  std::vector<double> logits;
  double loss = 0.0;
};

ExampleTerms forward(const RawExample& ex, const HeadSet& heads, double temperature) {
  if (ex.positives.empty()) throw Error(ErrorKind::kInvalidArgument, "example has no positives");
  ExampleTerms t;
  t.query = project(heads.query, ex.query);
  auto add = [&](const RawComponent& c) {
    t.components.push_back(project(heads.twin_head(c.kind), c.x));
    t.logits.push_back(dot(t.query.unit, t.components.back().unit) / temperature);
  };
  for (const auto& c : ex.positives) add(c);
  for (const auto& c : ex.negatives) add(c);

  const double shift = *std::max_element(t.logits.begin(), t.logits.end());
  double pos_mass = 0.0, all_mass = 0.0;
  for (std::size_t k = 0; k < t.logits.size(); ++k) {
    const double e = std::exp(t.logits[k] - shift);
    all_mass += e;
    if (k < ex.positives.size()) pos_mass += e;
  }
  t.loss = std::log(all_mass) - std::log(pos_mass);
  return t;
}

}  // namespace

double batch_loss(std::span<const RawExample> batch, const HeadSet& heads, double temperature) {
  double total = 0.0;
  for (const auto& ex : batch) total += forward(ex, heads, temperature).loss;
  return total;
}

HeadGradients gradients(std::span<const RawExample> batch, const HeadSet& heads,
                        double temperature) {
  if (batch.empty()) throw Error(ErrorKind::kInvalidArgument, "gradient batch is empty");
  HeadGradients g;
  g.query.assign(heads.query.weights().size(), 0.0);
  g.object.assign(heads.object.weights().size(), 0.0);
  g.relation.assign(heads.relation.weights().size(), 0.0);

  for (const auto& ex : batch) {
    ExampleTerms t = forward(ex, heads, temperature);
    g.loss += t.loss;

    const std::size_t npos = ex.positives.size();
    const double shift = *std::max_element(t.logits.begin(), t.logits.end());
    std::vector<double> mass(t.logits.size());
    double pos_mass = 0.0, all_mass = 0.0;
    for (std::size_t k = 0; k < mass.size(); ++k) {
      mass[k] = std::exp(t.logits[k] - shift);
      all_mass += mass[k];
      if (k < npos) pos_mass += mass[k];
    }

    // dL/ds_k = softmax_all(k) - [k in P] softmax_P(k); s_k = q.c_k / t.
    const std::size_t out = t.query.unit.size();
    std::vector<double> dq(out, 0.0);
    for (std::size_t k = 0; k < mass.size(); ++k) {
      double ds = mass[k] / all_mass;
      if (k < npos) ds -= mass[k] / pos_mass;
      ds /= temperature;
      const auto& c = t.components[k];
      for (std::size_t r = 0; r < out; ++r) dq[r] += ds * c.unit[r];

      std::vector<double> dc(t.query.unit);
      for (double& v : dc) v *= ds;
      const RawComponent& raw = k < npos ? ex.positives[k] : ex.negatives[k - npos];
      backprop_normalized(c, dc, raw.x,
                          raw.kind == ComponentKind::kObject ? g.object : g.relation);
    }
    backprop_normalized(t.query, dq, ex.query, g.query);
  }
  return g;
}

HeadSet initial_heads(std::size_t dim, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  HeadSet heads = HeadSet::identity(dim);
  for (ProjectionHead* head : {&heads.query, &heads.object, &heads.relation}) {
    for (double& w : head->weights()) w += noise * normal(rng);
  }
  return heads;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void descend(ProjectionHead& head, const std::vector<double>& grad, double lr) {
  auto w = head.weights();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
}

}  // namespace

TrainResult train_embedded(std::vector<RawExample> examples, std::size_t dim,
                           const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw Error(ErrorKind::kInvalidArgument, "training dataset is empty");

  TrainResult result{initial_heads(dim, config.seed, config.init_noise), {}};
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<RawExample> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(examples[order[i]]);

      HeadGradients g;
      try {
        g = gradients(batch, result.heads, config.temperature);
      } catch (const Error& e) {
        throw Error(ErrorKind::kDivergence,
                    "training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(g.loss) || !all_finite(g.query) || !all_finite(g.object) ||
          !all_finite(g.relation)) {
        throw Error(ErrorKind::kDivergence,
                    "training diverged at step " + std::to_string(step) + ": non-finite loss");
      }
      epoch_loss += g.loss;
      descend(result.heads.query, g.query, config.learning_rate);
      descend(result.heads.object, g.object, config.learning_rate);
      descend(result.heads.relation, g.relation, config.learning_rate);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  return result;
}

TrainResult train(const TrainingDataset& dataset, EmbeddingProvider& provider,
                  const TrainConfig& config) {
  dataset.validate();
  config.validate();

  std::vector<std::string> texts;
  texts.reserve(dataset.components.size() + dataset.examples.size());
  for (const auto& c : dataset.components) texts.push_back(c.text);
  for (const auto& ex : dataset.examples) texts.push_back(ex.subquery_text);
  const std::vector<EmbeddingVector> raw = provider.embed(texts);

  auto values = [&](std::size_t i) {
    auto v = raw[i].values();
    return std::vector<double>(v.begin(), v.end());
  };
  std::vector<RawExample> examples;
  examples.reserve(dataset.examples.size());
  for (std::size_t e = 0; e < dataset.examples.size(); ++e) {
    const auto& ex = dataset.examples[e];
    RawExample r;
    r.query = values(dataset.components.size() + e);
    for (auto ref : ex.positives) r.positives.push_back({dataset.components[ref].kind, values(ref)});
    for (auto ref : ex.negatives) r.negatives.push_back({dataset.components[ref].kind, values(ref)});
    examples.push_back(std::move(r));
  }
  return train_embedded(std::move(examples), provider.dim(), config);
}

TrainingDataset mine_training_dataset(const std::vector<DigitalTwin>& twins,
                                      const RelationMap& relations,
                                      const std::vector<MiningQuery>& queries,
                                      std::size_t negatives_per_positive, std::uint64_t seed) {
  TrainingDataset ds;
  const auto components = enumerate_components(twins, relations);
  std::map<std::string, std::vector<std::size_t>> by_video;
  for (std::size_t i = 0; i < components.size(); ++i) {
    ds.components.push_back({components[i].kind, components[i].rendered_text});
    by_video[components[i].video_id].push_back(i);
  }

  std::mt19937_64 rng(seed);
  for (const auto& q : queries) {
    auto it = by_video.find(q.gt_video_id);
    if (it == by_video.end()) {
      throw Error(ErrorKind::kDanglingReference,
                  "training query references unknown video \"" + q.gt_video_id + "\"");
    }
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (components[i].video_id != q.gt_video_id) others.push_back(i);
    }
    for (const auto& text : q.subquery_texts) {
      TrainingExample ex{text, it->second, {}};
      const std::size_t want = std::min(others.size(), negatives_per_positive * ex.positives.size());
      std::sample(others.begin(), others.end(), std::back_inserter(ex.negatives), want, rng);
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

json heads_to_checkpoint(const HeadSet& heads, const TrainConfig& config) {
  auto head_doc = [&](const ProjectionHead& h) {
    json doc = h.to_json();
    doc["seed"] = config.seed;
    doc["config"] = config.to_json();
    return doc;
  };
  return {{"format_version", 1},
          {"heads",
           {{"query", head_doc(heads.query)},
            {"object", head_doc(heads.object)},
            {"relation", head_doc(heads.relation)}}}};
}

HeadSet heads_from_checkpoint(const json& doc) {
  const json& heads = require_field(doc, "heads", "checkpoint");
  return {ProjectionHead::from_json(require_field(heads, "query", "heads")),
          ProjectionHead::from_json(require_field(heads, "object", "heads")),
          ProjectionHead::from_json(require_field(heads, "relation", "heads"))};
}

void save_heads(const std::filesystem::path& path, const HeadSet& heads, const TrainConfig& config) {
  write_text_file(path, canonical_json(heads_to_checkpoint(heads, config)));
}

HeadSet load_heads(const std::filesystem::path& path) {
  return heads_from_checkpoint(parse_json(read_text_file(path)));
}

}  // namespace rt2v
