#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "rt2v/error.hpp"
#include "rt2v/trainer.hpp"
#include "scratch.hpp"

using namespace rt2v;

namespace {

EmbeddingVector unit(std::vector<double> v) { return EmbeddingVector::normalized(std::move(v)); }

// -log(P / (P + N)) evaluated directly, without any shift.
double loss_formula(const EmbeddingVector& q, const std::vector<EmbeddingVector>& pos,
                    const std::vector<EmbeddingVector>& neg, double t) {
  long double p = 0, n = 0;
  for (const auto& x : pos) p += std::exp(static_cast<long double>(dot(q, x)) / t);
  for (const auto& x : neg) n += std::exp(static_cast<long double>(dot(q, x)) / t);
  return static_cast<double>(-std::log(p / (p + n)));
}

std::vector<RawExample> separable_toy(std::size_t dim) {
  std::vector<RawExample> out;
  for (std::size_t i = 0; i < dim; ++i) {
    RawExample ex;
    ex.query.assign(dim, 0.0);
    ex.query[i] = 1.0;
    ex.query[(i + 1) % dim] = 0.3;
    std::vector<double> pos(dim, 0.0);
    pos[i] = 1.0;
    ex.positives.push_back({ComponentKind::kObject, pos});
    for (std::size_t j = 0; j < dim; ++j) {
      if (j == i) continue;
      std::vector<double> neg(dim, 0.0);
      neg[j] = 1.0;
      ex.negatives.push_back({j % 2 ? ComponentKind::kObject : ComponentKind::kRelation, neg});
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("closed-form loss values") {
    const auto q = unit({1.0, 0.0});
    const std::vector<EmbeddingVector> pos = {unit({1.0, 0.0})}, neg = {unit({0.0, 1.0})};
    CHECK(nce_loss(q, pos, {}, 0.07) == 0.0);
    CHECK(std::abs(nce_loss(q, pos, neg, 1.0) - std::log1p(std::exp(-1.0))) < 1e-9);
    CHECK(nce_loss(q, pos, neg, 1.0) == doctest::Approx(0.31326).epsilon(1e-5));
    CHECK_THROWS_AS(nce_loss(q, {}, neg, 1.0), Error);
    CHECK_THROWS_AS(nce_loss(q, pos, neg, 0.0), Error);
  }

  TEST_CASE("loss matches the formula, is non-negative and grows with negatives") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t dim = 2 + rng() % 10;
      auto rv = [&] { return EmbeddingVector::from_unit(oracle::random_unit(rng, dim)); };
      const auto q = rv();
      std::vector<EmbeddingVector> pos, neg;
      for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) pos.push_back(rv());
      for (std::size_t i = 0, n = rng() % 6; i < n; ++i) neg.push_back(rv());
      const double t = 0.05 + std::uniform_real_distribution<double>(0, 2)(rng);
      const double l = nce_loss(q, pos, neg, t);
      CHECK(std::abs(l - loss_formula(q, pos, neg, t)) < 1e-12 * std::max(1.0, l));
      CHECK(l >= 0.0);
      auto more = neg;
      more.push_back(rv());
      CHECK(nce_loss(q, pos, more, t) >= l);
    }
  }

  TEST_CASE("analytic gradients agree with central differences") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto c = oracle::random_gradcheck_case(seed);
      const auto r = oracle::gradient_check(c);
      CAPTURE(seed);
      CHECK(r.max_relative_error < 1e-4);
    }
  }

  TEST_CASE("doubling the temperature is tracked by the gradients") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      auto c = oracle::random_gradcheck_case(seed);
      const auto g1 = gradients(c.batch, c.heads, c.temperature);
      c.temperature *= 2.0;
      const auto g2 = gradients(c.batch, c.heads, c.temperature);
      CHECK(oracle::gradient_check(c).max_relative_error < 1e-4);
      // A batch without negatives sits at zero loss for every temperature.
      if (g1.loss > 0.0) CHECK(g1.query != g2.query);
    }
  }

  TEST_CASE("flat point has zero gradient") {
    RawExample ex;
    ex.query = {0.6, 0.8, 0.0};
    ex.positives.push_back({ComponentKind::kObject, {0.6, 0.8, 0.0}});
    const std::vector<RawExample> batch = {ex};
    const auto g = gradients(batch, HeadSet::identity(3), 0.07);
    for (double v : g.query) CHECK(std::abs(v) < 1e-9);
    for (double v : g.object) CHECK(std::abs(v) < 1e-9);
    CHECK(g.loss == 0.0);
  }

  TEST_CASE("zero epochs return the initialization") {
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 42;
    const auto r = train_embedded(separable_toy(4), 4, cfg);
    CHECK(r.heads == initial_heads(4, 42, cfg.init_noise));
    CHECK(r.loss_trace.empty());
    const auto h = initial_heads(4, 42, 1e-3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(h.query.at(i, i) - 1.0) < 1e-2);
  }

  TEST_CASE("training improves a separable toy set and is deterministic") {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 2;
    cfg.seed = 3;
    const auto a = train_embedded(separable_toy(6), 6, cfg);
    REQUIRE(a.loss_trace.size() == 30);
    CHECK(a.loss_trace.back() < a.loss_trace.front());
    const auto b = train_embedded(separable_toy(6), 6, cfg);
    CHECK(canonical_json(heads_to_checkpoint(a.heads, cfg)) == canonical_json(heads_to_checkpoint(b.heads, cfg)));
  }

  TEST_CASE("divergence names the step") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e308;
    cfg.batch_size = 1;
    try {
      train_embedded(separable_toy(4), 4, cfg);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDivergence);
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.temperature = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.epochs = 7;
    CHECK(TrainConfig::from_json(cfg.to_json()).epochs == 7);
  }

  TEST_CASE("mined datasets and provider-level training") {
    std::mt19937_64 rng(5);
    std::vector<DigitalTwin> twins;
    RelationMap rel;
    for (int i = 0; i < 4; ++i) {
      twins.push_back(oracle::random_twin(rng, "v" + std::to_string(i)));
      rel[twins.back().video_id] = extract_relations(twins.back());
    }
    const std::vector<MiningQuery> qs = {{"v1", {"cat left", "red ball"}}, {"v2", {"dog"}}};
    const auto ds = mine_training_dataset(twins, rel, qs, 2, 9);
    CHECK_NOTHROW(ds.validate());
    REQUIRE(ds.examples.size() == 3);
    const auto components = enumerate_components(twins, rel);
    for (const auto& ex : ds.examples) {
      for (auto p : ex.positives) CHECK(components[p].video_id == (ex.subquery_text == "dog" ? "v2" : "v1"));
      for (auto n : ex.negatives) CHECK(std::find(ex.positives.begin(), ex.positives.end(), n) == ex.positives.end());
    }
    CHECK_THROWS_AS(mine_training_dataset(twins, rel, {{"nope", {"x"}}}), Error);

    TrainConfig cfg;
    cfg.epochs = 2;
    HashEmbeddingProvider p(16);
    const auto r1 = train(ds, p, cfg), r2 = train(ds, p, cfg);
    CHECK(r1.heads == r2.heads);
    CHECK(r1.loss_trace.size() == 2);
  }

  TEST_CASE("checkpoint round-trip") {
    TrainConfig cfg;
    cfg.seed = 11;
    const auto heads = initial_heads(5, 11, 1e-3);
    oracle::ScratchDir dir("heads");
    save_heads(dir / "h.json", heads, cfg);
    CHECK(load_heads(dir / "h.json") == heads);
    const json doc = heads_to_checkpoint(heads, cfg);
    CHECK(doc["heads"]["query"]["in_dim"] == 5);
    CHECK(doc["heads"]["query"]["seed"] == 11);
    CHECK(doc["heads"]["object"]["config"]["temperature"] == 0.07);
  }
}
