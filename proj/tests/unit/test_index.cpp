#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rt2v/error.hpp"
#include "rt2v/index.hpp"
#include "scratch.hpp"

using namespace rt2v;

namespace {

struct RandomIndex {
  ComponentIndex index;
  std::vector<oracle::Row> rows;
  std::vector<IndexEntry> entries;
};

RandomIndex random_index(std::mt19937_64& rng, std::size_t videos, std::size_t dim) {
  RandomIndex out;
  for (std::size_t v = 0; v < videos; ++v) {
    const std::string id = "v" + std::to_string(1000 + rng() % 9000);
    if (std::any_of(out.rows.begin(), out.rows.end(), [&](const auto& r) { return r.video_id == id; })) continue;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t c = 0; c < n; ++c) {
      auto vec = oracle::random_unit(rng, dim);
      const ComponentKind kind = rng() % 2 ? ComponentKind::kObject : ComponentKind::kRelation;
      out.entries.push_back({{id, kind, std::to_string(c), "text"}, EmbeddingVector::from_unit(vec)});
      out.rows.push_back({id, vec});
    }
  }
  out.index = ComponentIndex({"test", "h", dim}, out.entries);
  return out;
}

std::vector<EmbeddingVector> random_queries(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<EmbeddingVector> q;
  for (std::size_t i = 0; i < n; ++i) q.push_back(EmbeddingVector::from_unit(oracle::random_unit(rng, dim)));
  return q;
}

class FailingProvider final : public EmbeddingProvider {
 public:
  std::size_t dim() const override { return 16; }
  std::string id() const override { return "failing"; }

 protected:
  std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
    if (++calls_ == 2) throw Error(ErrorKind::kProvider, "upstream 503");
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) out.push_back(hash_embed(t, 16));
    return out;
  }

 private:
  int calls_ = 0;
};

}  // namespace

TEST_SUITE("index") {
  TEST_CASE("entry counts follow tracks and relations") {
    const auto t = oracle::make_twin("v1", {{{1, "cat", 0.1, 0.5, 0.5, 0.1}, {2, "table", 0.9, 0.5, 0.5, 0.1}}});
    HashEmbeddingProvider p(32);
    const auto heads = HeadSet::identity(32);
    RelationMap rel{{"v1", {{1, 2, Predicate::kLeftOf, 1.0}}}};
    CHECK(build_index({t}, rel, p, heads).size() == 3);
    const auto objects_only = build_index({t}, {}, p, heads);
    CHECK(objects_only.size() == 2);
    CHECK(objects_only.descriptor(0).kind == ComponentKind::kObject);
  }

  TEST_CASE("built entries equal a per-video enumeration") {
    std::mt19937_64 rng(8);
    std::vector<DigitalTwin> twins;
    RelationMap rel;
    for (int i = 0; i < 5; ++i) {
      twins.push_back(oracle::random_twin(rng, "vid" + std::to_string(i)));
      rel[twins.back().video_id] = extract_relations(twins.back());
    }
    HashEmbeddingProvider p(64);
    const auto heads = HeadSet::identity(64);
    const auto index = build_index(twins, rel, p, heads, 7);

    std::multiset<std::tuple<std::string, int, std::string, std::string>> expected, got;
    for (const auto& t : twins) {
      for (TrackId id : t.track_ids()) expected.insert({t.video_id, 0, std::to_string(id), render_object_text(t, id)});
      for (const auto& r : rel[t.video_id]) expected.insert({t.video_id, 1, relation_key(r), render_relation_text(r, t)});
    }
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto& d = index.descriptor(i);
      got.insert({d.video_id, d.kind == ComponentKind::kObject ? 0 : 1, d.key, d.rendered_text});
      const auto want = hash_embed(d.rendered_text, 64);
      for (std::size_t k = 0; k < 64; ++k) CHECK(index.row(i)[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
    CHECK(got == expected);
  }

  TEST_CASE("provider failure names the batch") {
    std::mt19937_64 rng(9);
    std::vector<DigitalTwin> twins;
    for (int i = 0; i < 6; ++i) twins.push_back(oracle::random_twin(rng, "v" + std::to_string(i)));
    FailingProvider p;
    try {
      build_index(twins, {}, p, HeadSet::identity(16), 2);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kProvider);
      CHECK(std::string(e.what()).find("batch 1") != std::string::npos);
    }
  }

  TEST_CASE("index construction invariants") {
    const auto v = EmbeddingVector::from_unit({1.0, 0.0});
    CHECK_THROWS_AS(ComponentIndex({"p", "h", 2}, {{{"a", ComponentKind::kObject, "1", "x"}, v},
                                                     {{"a", ComponentKind::kObject, "1", "y"}, v}}),
                    Error);
    CHECK_THROWS_AS(ComponentIndex({"p", "h", 3}, {{{"a", ComponentKind::kObject, "1", "x"}, v}}), Error);
  }

  TEST_CASE("hand-computed aggregation") {
    // Video with components e0 and e1; sub-queries whose best matches are 0.8 and 0.4.
    const auto e0 = EmbeddingVector::from_unit({1.0, 0.0, 0.0});
    const auto e1 = EmbeddingVector::from_unit({0.0, 1.0, 0.0});
    ComponentIndex index({"p", "h", 3}, {{{"a", ComponentKind::kObject, "1", "x"}, e0},
                                         {{"a", ComponentKind::kObject, "2", "y"}, e1}});
    const std::vector<EmbeddingVector> q = {EmbeddingVector::from_unit({0.8, 0.0, 0.6}),
                                            EmbeddingVector::from_unit({0.0, 0.4, std::sqrt(0.84)})};
    const auto mean = compositional_score(index, "a", q, {});
    CHECK(mean.score == doctest::Approx(0.6).epsilon(1e-12));
    REQUIRE(mean.best.size() == 2);
    CHECK(mean.best[0].component_key == "1");
    CHECK(mean.best[1].component_key == "2");
    const auto mn = compositional_score(index, "a", q, {AggregationSpec::Mode::kMin, {}});
    CHECK(mn.score == doctest::Approx(0.4).epsilon(1e-12));
    const std::vector<EmbeddingVector> exact = {e1};
    CHECK(compositional_score(index, "a", exact, {}).score == 1.0);
    const auto weighted = compositional_score(index, "a", q, {AggregationSpec::Mode::kWeightedMean, {3.0, 1.0}});
    CHECK(weighted.score == doctest::Approx(0.7).epsilon(1e-12));
  }

  TEST_CASE("scoring errors") {
    std::mt19937_64 rng(1);
    auto r = random_index(rng, 3, 8);
    const auto q = random_queries(rng, 2, 8);
    CHECK_THROWS_AS(compositional_score(r.index, "missing", q, {}), Error);
    CHECK_THROWS_AS(compositional_score(r.index, r.index.video_ids()[0], {}, {}), Error);
    CHECK_THROWS_AS(retrieve_topk(r.index, q, {}, 0), Error);
    CHECK_THROWS_AS(retrieve_topk(ComponentIndex{}, q, {}, 5), Error);
    CHECK_THROWS_AS(compositional_score(r.index, r.index.video_ids()[0], q, {AggregationSpec::Mode::kWeightedMean, {1.0}}), Error);
    CHECK_THROWS_AS(parse_aggregation("max"), Error);
  }

  TEST_CASE("score equals exhaustive double loop on random indexes") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t dim = 4 + rng() % 20;
      auto r = random_index(rng, 1 + rng() % 10, dim);
      const auto q = random_queries(rng, 1 + rng() % 5, dim);
      for (const auto& vid : r.index.video_ids()) {
        const double mean = compositional_score(r.index, vid, q, {}).score;
        const double mn = compositional_score(r.index, vid, q, {AggregationSpec::Mode::kMin, {}}).score;
        CHECK(std::abs(mean - oracle::compositional_score(r.rows, vid, q, false)) < 1e-9);
        CHECK(std::abs(mn - oracle::compositional_score(r.rows, vid, q, true)) < 1e-9);
        CHECK(mn <= mean + 1e-15);
      }
    }
  }

  TEST_CASE("full ranking equals oracle sort; ties by video id") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      auto r = random_index(rng, 2 + rng() % 12, 6);
      const auto q = random_queries(rng, 2, 6);
      std::vector<std::pair<double, std::string>> want;
      for (const auto& vid : r.index.video_ids()) want.push_back({-oracle::compositional_score(r.rows, vid, q, false), vid});
      std::sort(want.begin(), want.end());
      const auto got = retrieve_topk(r.index, q, {}, r.index.video_ids().size());
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].video_id == want[i].second);
    }
    const auto e = EmbeddingVector::from_unit({1.0, 0.0});
    ComponentIndex tie({"p", "h", 2}, {{{"b", ComponentKind::kObject, "1", "x"}, e}, {{"a", ComponentKind::kObject, "1", "x"}, e}});
    const std::vector<EmbeddingVector> q = {e};
    const auto ranked = retrieve_topk(tie, q, {}, 10);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].video_id == "a");
    CHECK(ranked[1].video_id == "b");
  }

  TEST_CASE("permutation invariance and top-k prefix") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
      auto r = random_index(rng, 12, 8);
      const auto q = random_queries(rng, 3, 8);
      auto shuffled = r.entries;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      ComponentIndex other({"test", "h", 8}, shuffled);
      const auto a = rank_all(r.index, q, {}), b = rank_all(other, q, {});
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].video_id == b[i].video_id);
        CHECK(a[i].score == b[i].score);
      }
      const auto k5 = retrieve_topk(r.index, q, {}, 5), k10 = retrieve_topk(r.index, q, {}, 10);
      for (std::size_t i = 0; i < k5.size(); ++i) CHECK(k5[i].video_id == k10[i].video_id);
      CHECK(retrieve_topk(r.index, q, {}).size() == std::min<std::size_t>(kDefaultTopK, a.size()));
    }
  }

  TEST_CASE("adding a component never lowers a score") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
      auto r = random_index(rng, 4, 6);
      const auto q = random_queries(rng, 3, 6);
      const std::string vid = r.index.video_ids()[0];
      auto more = r.entries;
      more.push_back({{vid, ComponentKind::kObject, "extra", "t"}, EmbeddingVector::from_unit(oracle::random_unit(rng, 6))});
      ComponentIndex bigger({"test", "h", 6}, more);
      for (auto mode : {AggregationSpec::Mode::kWeightedMean, AggregationSpec::Mode::kMin}) {
        CHECK(compositional_score(bigger, vid, q, {mode, {}}).score >= compositional_score(r.index, vid, q, {mode, {}}).score);
      }
    }
  }

  TEST_CASE("index document round-trip") {
    std::mt19937_64 rng(16);
    auto r = random_index(rng, 5, 8);
    oracle::ScratchDir dir("index");
    r.index.save(dir / "index.json");
    const auto back = ComponentIndex::load(dir / "index.json");
    REQUIRE(back.size() == r.index.size());
    CHECK(back.metadata().provider_id == "test");
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back.descriptor(i) == r.index.descriptor(i));
      CHECK(std::equal(back.row(i).begin(), back.row(i).end(), r.index.row(i).begin()));
    }
    CHECK(canonical_json(back.to_json()) == canonical_json(r.index.to_json()));
    CHECK(r.index.to_json()["format_version"] == kIndexFormatVersion);
  }
}
