#include <doctest.h>

#include <chrono>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cli.hpp"
#include "rt2v/bench_io.hpp"
#include "rt2v/engine.hpp"
#include "rt2v/error.hpp"
#include "rt2v/service.hpp"
#include "scratch.hpp"

using namespace rt2v;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// A small generated benchmark shared by the cases in this file.
const std::filesystem::path& bench_root() {
  static oracle::ScratchDir dir("iface");
  static const bool made = [] {
    generate_synthetic({}, dir / "bench");
    return true;
  }();
  (void)made;
  static const auto root = dir / "bench";
  return root;
}

EngineConfig config() {
  EngineConfig c;
  c.benchmark = bench_root().string();
  return c;
}

std::string first_query() {
  return load_benchmark(bench_root()).manifest.queries.front().text;
}

}  // namespace

TEST_SUITE("interface") {
  TEST_CASE("config defaults and document round-trip") {
    EngineConfig c;
    CHECK(c.k == 10);
    CHECK(c.tau == 0.5);
    CHECK(c.fixture_mode);
    c.benchmark = "b";
    c.api_key = "secret";
    const auto doc = c.to_json();
    CHECK_FALSE(doc.contains("api_key"));
    const auto back = EngineConfig::from_json(doc);
    CHECK(back.benchmark == "b");
    CHECK(back.k == 10);
    CHECK(EngineConfig::from_json(json::object()).tau == 0.5);
    EngineConfig bad;
    bad.benchmark = "b";
    bad.tau = 2.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.tau = 0.5;
    bad.k = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("fixture engine retrieves every ground truth first") {
    Engine engine(config());
    const auto report = engine.evaluate();
    CHECK(report.recall[0] == 1.0);
    CHECK(report.median_rank == 1.0);
    CHECK(report.mean_j == 1.0);
    CHECK(report.mean_f == 1.0);

    const auto resp = engine.query(first_query(), 5, 0.4);
    CHECK(resp.k == 5);
    CHECK(resp.tau == 0.4);
    CHECK(resp.ranking.entries.size() == engine.benchmark().twins.size());
    CHECK(resp.timing.decompose_ms == 0.0);
    CHECK(resp.to_table().find("verified") != std::string::npos);
    CHECK_THROWS_AS(engine.twin("nope"), Error);
    CHECK_THROWS_AS(engine.query(""), Error);
    const auto& first = engine.benchmark().twins.front();
    const auto& inst = first.frames.front().instances.front();
    CHECK(engine.mask_rle(first.video_id, inst.instance_id, 0).rfind("R1 ", 0) == 0);
    CHECK(engine.health()["status"] == "ok");
  }

  TEST_CASE("cli query echoes the constants") {
    const auto r = cli({"query", "--benchmark", bench_root().string(), "--query", first_query(), "--k",
                        "10", "--tau", "0.5"});
    REQUIRE(r.code == kExitOk);
    const auto doc = parse_json(r.out);
    CHECK(doc["k"] == 10);
    CHECK(doc["tau"] == 0.5);
    CHECK(doc["entries"][0]["tier"] == "verified");

    const auto table = cli({"query", "--benchmark", bench_root().string(), "--query", first_query(),
                            "--format", "table"});
    CHECK(table.code == kExitOk);
    CHECK(table.out.find("verified") != std::string::npos);
  }

  TEST_CASE("cli eval reports perfect recall on the fixture benchmark") {
    const auto r = cli({"eval", "--benchmark", bench_root().string()});
    REQUIRE(r.code == kExitOk);
    const auto doc = parse_json(r.out);
    CHECK(doc["recall"]["R@1"] == 1.0);
    CHECK(doc["MdR"] == 1.0);
    CHECK(doc["ks"] == json::array({1, 5, 10, 50, 100}));

    const auto small = cli({"eval", "--benchmark", bench_root().string(), "--ks", "1,5,10"});
    REQUIRE(small.code == kExitOk);
    CHECK(parse_json(small.out)["ks"] == json::array({1, 5, 10}));
    CHECK(cli({"eval", "--benchmark", bench_root().string(), "--ks", "0"}).code == kExitUsage);
  }

  TEST_CASE("cli usage errors") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"query", "--benchmark", bench_root().string(), "--query", ""}).code == kExitUsage);
    CHECK(cli({"query", "--benchmark", bench_root().string(), "--query", "x", "--bogus"}).code ==
          kExitUsage);
    const auto missing = cli({"eval", "--benchmark", (bench_root() / "absent").string()});
    CHECK(missing.code == kExitFailure);
    CHECK(parse_json(missing.err)["error"]["kind"].is_string());
  }

  TEST_CASE("cli generate and ingest") {
    oracle::ScratchDir dir("cli-gen");
    const auto g = cli({"generate", "--out", (dir / "b").string(), "--videos", "4", "--distractors",
                        "1", "--queries", "3"});
    REQUIRE(g.code == kExitOk);
    CHECK(load_benchmark(dir / "b").twins.size() == 4);
    const auto i = cli({"ingest", "--in", (dir / "b" / "twins" / "vid001.json").string(), "--out",
                        (dir / "copy.json").string()});
    CHECK(i.code == kExitOk);

    // A benchmark root resolves to its twin directory.
    CHECK(parse_json(cli({"ingest", "--in", (dir / "b").string()}).out)["ingested"] == 4);
    CHECK(cli({"relate", "--in", (dir / "b").string(), "--out", (dir / "rel.json").string()}).code == kExitOk);
    const auto idx = cli({"index", "--in", (dir / "b").string(), "--out", (dir / "index.json").string()});
    REQUIRE(idx.code == kExitOk);
    CHECK(parse_json(idx.out)["videos"] == 4);
    const auto ev = cli({"eval", "--benchmark", (dir / "b").string(), "--index", (dir / "index.json").string()});
    CHECK(ev.code == kExitOk);
  }

  TEST_CASE("service routes and status codes") {
    Service svc;
    CHECK(svc.handle("GET", "/health", "").status == 503);
    CHECK(svc.handle("POST", "/v1/retrieve", R"({"query":"x"})").status == 503);
    svc.attach(std::make_shared<Engine>(config()));
    CHECK(svc.handle("GET", "/health", "").status == 200);
    CHECK(svc.handle("GET", "/v1/twins/nonexistent", "").status == 404);
    CHECK(svc.handle("GET", "/v1/twins/vid001", "").status == 200);
    CHECK(svc.handle("GET", "/v1/nothing", "").status == 404);
    CHECK(svc.handle("POST", "/v1/retrieve", "{").status == 422);
    CHECK(svc.handle("POST", "/v1/retrieve", R"({"query":""})").status == 422);
    CHECK(svc.handle("POST", "/v1/retrieve", R"({"query":"x","k":0})").status == 422);
    CHECK(svc.handle("POST", "/v1/retrieve", R"({"query":"x","tau":3})").status == 422);
    CHECK(svc.handle("POST", "/v1/retrieve", R"({"query":"x","extra":1})").status == 422);
    const auto mask = svc.handle("GET", "/v1/masks/vid001/1/0", "");
    CHECK(mask.status == 200);
    CHECK(mask.content_type.find("text/plain") == 0);
    CHECK(mask.body.rfind("R1 64 48 ", 0) == 0);
    CHECK(svc.handle("GET", "/v1/masks/vid001/99/0", "").status == 404);
  }

  TEST_CASE("service loading states") {
    Service ok;
    ok.load_async(config());
    int status = 503;
    for (int i = 0; i < 600 && status == 503; ++i) {
      status = ok.handle("GET", "/health", "").status;
      if (status == 503) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    CHECK(status == 200);

    Service broken;
    auto cfg = config();
    cfg.benchmark = (bench_root() / "absent").string();
    broken.load_async(cfg);
    status = 503;
    for (int i = 0; i < 600 && status == 503; ++i) {
      status = broken.handle("GET", "/health", "").status;
      if (status == 503) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    CHECK(status == 500);
  }

  TEST_CASE("cli and http retrieval agree byte for byte") {
    Service svc;
    svc.attach(std::make_shared<Engine>(config()));
    const int port = svc.bind("127.0.0.1", 0);
    std::thread server([&] { svc.listen(); });
    httplib::Client client("127.0.0.1", port);
    const auto q = first_query();
    const auto res = client.Post("/v1/retrieve", canonical_json({{"query", q}, {"k", 10}, {"tau", 0.5}}),
                                 "application/json");
    svc.stop();
    server.join();
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto r = cli({"query", "--benchmark", bench_root().string(), "--query", q});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == res->body + "\n");
  }
}
