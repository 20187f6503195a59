// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "segsort/loss.hpp"
#include "segsort/pixel_sort.hpp"
#include "segsort/retrieval.hpp"

namespace {

using namespace segsort;

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  return normalized(v);
}

VectorSet random_units(std::mt19937_64& rng, std::size_t count, std::size_t dim) {
  VectorSet out(dim);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_unit(rng, dim));
  return out;
}

void BM_SphericalKMeans(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto vs = random_units(rng, side * side, 32);
  const EmbeddingMap emb(side, side, 32, vs.data());
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(spherical_kmeans(emb, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_SphericalKMeans)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_VmfnLoss(benchmark::State& state) {
  const auto pixels = static_cast<std::size_t>(state.range(0));
  const auto protos = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  LossBatch b;
  b.embeddings = random_units(rng, pixels, 32);
  b.prototypes = random_units(rng, protos, 32);
  for (std::size_t s = 0; s < protos; ++s) b.prototype_labels.push_back(static_cast<ClassId>(s % 4));
  for (std::size_t i = 0; i < pixels; ++i) b.own.push_back(i % protos);
  for (auto _ : state) benchmark::DoNotOptimize(vmfn_loss(b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pixels));
}
BENCHMARK(BM_VmfnLoss)->Args({4096, 50})->Args({8192, 150})->Unit(benchmark::kMillisecond);

void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<Prototype> ps(n);
  for (std::size_t i = 0; i < n; ++i) {
    ps[i].vector = random_unit(rng, 32);
    ps[i].segment_id = static_cast<std::uint32_t>(i);
    ps[i].label = static_cast<ClassId>(i % 4);
  }
  const PrototypeStore store(std::move(ps));
  const auto q = random_unit(rng, 32);
  for (auto _ : state) benchmark::DoNotOptimize(knn(store, q, 21));
}
BENCHMARK(BM_Knn)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
