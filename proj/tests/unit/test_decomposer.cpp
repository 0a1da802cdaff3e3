#include <doctest.h>

#include <cmath>

#include "rt2v/decomposer.hpp"
#include "rt2v/error.hpp"
#include "rt2v/llm.hpp"
#include "scratch.hpp"

using namespace rt2v;

namespace {

ScriptedLlmClient sequence(std::vector<std::string> answers) {
  return ScriptedLlmClient([answers](const LlmRequest& r) { return answers[std::min(r.turn, answers.size() - 1)]; });
}

}  // namespace

TEST_SUITE("decomposer") {
  TEST_CASE("fixture decomposition preserves order and kinds") {
    oracle::ScratchDir dir("fixtures");
    const std::string query = "clips where a pet finds an unfamiliar object and investigates it";
    write_llm_fixture(dir.path(), kDecomposeSchema, query,
                      json::array({json::array({{{"text", "a pet"}, {"kind", "attribute"}},
                                                {{"text", "finds an object"}, {"kind", "action"}},
                                                {{"text", "investigates the object"}, {"kind", "action"}}})}));
    FixtureLlmClient client(dir.path());
    const auto subs = decompose(query, client);
    REQUIRE(subs.size() == 3);
    CHECK(subs[0] == SubQuery{"a pet", SubQueryKind::kAttribute, 1.0});
    CHECK(subs[1] == SubQuery{"finds an object", SubQueryKind::kAction, 1.0});
    CHECK(subs[2] == SubQuery{"investigates the object", SubQueryKind::kAction, 1.0});
    CHECK(decompose(query, client) == subs);
    CHECK_THROWS_AS(decompose("never recorded", client), Error);
  }

  TEST_CASE("one re-ask after a non-array answer") {
    auto client = sequence({R"({"text":"x"})", R"([{"text":"red car","kind":"attribute","weight":2}])"});
    const auto subs = decompose("q", client);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].weight == 2.0);
    const auto reqs = client.requests();
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[0].schema_id == "decompose.v1");
    CHECK(reqs[1].turn == 1);
    CHECK(reqs[1].prompt.find("rejected") != std::string::npos);
    CHECK(reqs[0].prompt.rfind("[decompose.v1]", 0) == 0);
  }

  TEST_CASE("persistent empty answers fail with the raw responses") {
    auto client = sequence({"[]"});
    try {
      decompose("q", client);
      FAIL("expected failure");
    } catch (const DecompositionError& e) {
      CHECK(e.kind() == ErrorKind::kDecomposition);
      CHECK(e.raw_responses() == std::vector<std::string>(3, "[]"));
    }
    auto once = sequence({"[]"});
    CHECK_THROWS_AS(decompose("q", once, 1), DecompositionError);
    CHECK(once.requests().size() == 2);
  }

  TEST_CASE("schema checks") {
    auto kind = [](const std::string& text) {
      try {
        parse_decomposition(text);
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::kIo;
    };
    CHECK(kind("not json") == ErrorKind::kSchema);
    CHECK(kind("[]") == ErrorKind::kSchema);
    CHECK(kind(R"([{"text":"","kind":"action"}])") == ErrorKind::kSchema);
    CHECK(kind(R"([{"text":"a","kind":"mood"}])") == ErrorKind::kSchema);
    CHECK(kind(R"([{"text":"a","kind":"action","weight":0}])") == ErrorKind::kSchema);
    CHECK(kind(R"([{"kind":"action"}])") == ErrorKind::kSchema);
    json many = json::array();
    for (int i = 0; i < 17; ++i) many.push_back({{"text", "t" + std::to_string(i)}, {"kind", "spatial"}});
    CHECK(kind(many.dump()) == ErrorKind::kSchema);
    many.erase(16);
    CHECK(parse_decomposition(many.dump()).size() == kMaxSubQueries);
    for (auto k : {SubQueryKind::kAttribute, SubQueryKind::kSpatial, SubQueryKind::kTemporal, SubQueryKind::kAction}) {
      CHECK(parse_subquery_kind(subquery_kind_name(k)) == k);
    }
  }

  TEST_CASE("empty query is rejected before any call") {
    auto client = sequence({"[]"});
    CHECK_THROWS_AS(decompose("", client), Error);
    CHECK(client.requests().empty());
  }

  TEST_CASE("sub-query embedding") {
    HashEmbeddingProvider p(32);
    const auto head = ProjectionHead::identity(32);
    const std::vector<SubQuery> one = {{"red car", SubQueryKind::kAttribute, 1.0}};
    const auto v1 = embed_subqueries(one, p, head);
    REQUIRE(v1.size() == 1);
    double n = 0;
    for (double x : v1[0].values()) n += x * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0));

    const std::vector<SubQuery> three = {{"cat", SubQueryKind::kAttribute, 1.0},
                                         {"cat", SubQueryKind::kAction, 1.0},
                                         {"near the table", SubQueryKind::kSpatial, 1.0}};
    std::vector<double> w(32 * 32);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(static_cast<double>(i));
    const ProjectionHead h(32, 32, w);
    const auto v3 = embed_subqueries(three, p, h);
    REQUIRE(v3.size() == 3);
    CHECK(v3[0] == v3[1]);
    for (std::size_t i = 0; i < 3; ++i) CHECK(v3[i] == apply_projection(hash_embed(three[i].text, 32), h));
  }

  TEST_CASE("fixture client turn selection and fallback") {
    oracle::ScratchDir dir("fx");
    write_llm_fixture(dir.path(), kReasonSchema, "k", json::array({"first", json{{"a", 1}}}));
    FixtureLlmClient c(dir.path());
    CHECK(c.complete({"reason.v1", "p", "k", 0}) == "first");
    CHECK(c.complete({"reason.v1", "p", "k", 1}) == R"({"a":1})");
    CHECK(c.complete({"reason.v1", "p", "k", 9}) == R"({"a":1})");
    CHECK_THROWS_AS(c.complete({"reason.v1", "p", "other", 0}), Error);
    write_text_file(dir / "reasoner/default.json", R"({"key":"*","responses":["fallback"]})");
    CHECK(c.complete({"reason.v1", "p", "other", 0}) == "fallback");
    CHECK(c.complete({"reason.v1", "a different prompt", "k", 0}) == "first");
  }
}
