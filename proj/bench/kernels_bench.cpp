// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>

#include "chn/data.hpp"
#include "chn/hashing.hpp"
#include "chn/losses.hpp"

using namespace chn;

namespace {

HashCodeMatrix random_codes(std::size_t n, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  HashCodeMatrix m(n, bits);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < bits; ++k) m.set_bit(i, k, rng() & 1);
  return m;
}

Matrix random_embeddings(std::size_t n, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  Matrix m(n, bits);
  for (double& x : m.flat()) x = u(rng);
  return m;
}

SimilaritySet random_pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelMatrix labels(n, 4);
  for (std::size_t i = 0; i < n; ++i) labels(i, rng() % 4) = 1;
  return all_pairs(labels);
}

template <bool Serial>
void BM_Search(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const HashCodeMatrix db = random_codes(n, 64, 1), q = random_codes(1, 64, 2);
  for (auto _ : state) {
    RankedResult r = Serial ? search_serial(db, q.row(0), 100) : search(db, q.row(0), 100);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Serial>
void BM_JointLoss(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix U = random_embeddings(n, 32, 3), V = random_embeddings(n, 32, 4);
  const SimilaritySet pairs = random_pairs(n, 5);
  const LossWeights w;
  for (auto _ : state) {
    LossReport r = Serial ? joint_loss_serial(U, V, pairs, w) : joint_loss(U, V, pairs, w);
    benchmark::DoNotOptimize(r.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}

template <bool Serial>
void BM_Residuals(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix U = random_embeddings(n, 32, 3), V = random_embeddings(n, 32, 4);
  const SimilaritySet pairs = random_pairs(n, 5);
  const LossWeights w;
  for (auto _ : state) {
    ResidualPair r = Serial ? output_residuals_serial(U, V, pairs, w) : output_residuals(U, V, pairs, w);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}

}  // namespace

BENCHMARK(BM_Search<true>)->Name("search/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_Search<false>)->Name("search/omp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_JointLoss<true>)->Name("joint_loss/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_JointLoss<false>)->Name("joint_loss/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_Residuals<true>)->Name("residuals/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_Residuals<false>)->Name("residuals/omp")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
