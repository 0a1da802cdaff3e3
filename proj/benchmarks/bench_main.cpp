#include <benchmark/benchmark.h>

#include <random>

#include "rt2v/embedding.hpp"
#include "rt2v/index.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/metrics.hpp"

using namespace rt2v;

namespace {

EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n;
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return EmbeddingVector::normalized(std::move(v));
}

ComponentIndex synthetic_index(std::size_t videos, std::size_t per_video, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::vector<IndexEntry> entries;
  for (std::size_t v = 0; v < videos; ++v) {
    for (std::size_t c = 0; c < per_video; ++c) {
      entries.push_back({{"v" + std::to_string(v), ComponentKind::kObject, std::to_string(c), "t"},
                         random_vector(rng, dim)});
    }
  }
  return ComponentIndex({"bench", "h", dim}, std::move(entries));
}

MaskBitmap disc(std::uint32_t side, double r, double cx, double cy) {
  MaskBitmap m(side, side);
  for (std::uint32_t y = 0; y < side; ++y) {
    for (std::uint32_t x = 0; x < side; ++x) {
      const double dx = x - cx, dy = y - cy;
      m.set(x, y, dx * dx + dy * dy <= r * r);
    }
  }
  return m;
}

void BM_RankAll(benchmark::State& state) {
  const auto videos = static_cast<std::size_t>(state.range(0));
  const auto index = synthetic_index(videos, 12, kDefaultEmbeddingDim);
  std::mt19937_64 rng(2);
  const std::vector<EmbeddingVector> q = {random_vector(rng, kDefaultEmbeddingDim),
                                          random_vector(rng, kDefaultEmbeddingDim),
                                          random_vector(rng, kDefaultEmbeddingDim)};
  for (auto _ : state) benchmark::DoNotOptimize(rank_all(index, q, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(index.size()));
}
BENCHMARK(BM_RankAll)->Arg(135)->Arg(1000);

void BM_HashEmbed(benchmark::State& state) {
  const std::string text = "orange striped cat to the left of a wooden table";
  for (auto _ : state) benchmark::DoNotOptimize(hash_embed(text, kDefaultEmbeddingDim));
}
BENCHMARK(BM_HashEmbed);

void BM_RleRoundTrip(benchmark::State& state) {
  const auto mask = disc(static_cast<std::uint32_t>(state.range(0)), state.range(0) / 3.0,
                         state.range(0) / 2.0, state.range(0) / 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(rle_decode(rle_encode(mask)));
}
BENCHMARK(BM_RleRoundTrip)->Arg(64)->Arg(512);

void BM_ContourAccuracy(benchmark::State& state) {
  const auto side = static_cast<std::uint32_t>(state.range(0));
  const auto a = disc(side, side / 3.0, side / 2.0, side / 2.0);
  const auto b = disc(side, side / 3.0, side / 2.0 + 2, side / 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(contour_accuracy(a, b));
}
BENCHMARK(BM_ContourAccuracy)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
