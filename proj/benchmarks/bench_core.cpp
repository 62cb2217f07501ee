#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "longsteer/analysis.hpp"
#include "longsteer/backend.hpp"
#include "longsteer/memory.hpp"
#include "longsteer/mock_backend.hpp"
#include "longsteer/transformer_backend.hpp"

namespace ls = longsteer;

namespace {

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void BM_NormPreservingEdit(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  auto h = random_vector(rng, n);
  const auto v = random_vector(rng, n);
  for (auto _ : state) {
    ls::apply_norm_preserving_edit(h, v, 0.1);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NormPreservingEdit)->Arg(64)->Arg(4096);

void BM_TopK(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int dim = 4096;
  ls::DomainMemory mem("bench", 0, dim);
  for (int i = 0; i < state.range(0); ++i) {
    mem.add({random_vector(rng, dim), random_vector(rng, dim), std::to_string(i), "math"});
  }
  const auto q = random_vector(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(ls::retrieve_domain_vector(mem, q, 8));
}
BENCHMARK(BM_TopK)->Arg(100)->Arg(1000);

void BM_MatrixEntropy(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(state.range(0), 512);
  for (auto _ : state) benchmark::DoNotOptimize(ls::matrix_entropy(z));
}
BENCHMARK(BM_MatrixEntropy)->Arg(100)->Arg(400);

void BM_MockHiddenState(benchmark::State& state) {
  ls::MockBackend backend;
  const std::string text = "the quick brown fox jumps over the lazy dog again and again";
  for (auto _ : state) benchmark::DoNotOptimize(backend.hidden_state(text, 2));
}
BENCHMARK(BM_MockHiddenState);

void BM_TransformerGenerate(benchmark::State& state) {
  const std::filesystem::path dir = LONGSTEER_MODEL_DIR;
  if (!std::filesystem::exists(dir / "model.safetensors")) {
    state.SkipWithError("no checkpoint");
    return;
  }
  auto backend = ls::TransformerBackend::load(dir);
  backend->settings().max_new_tokens = 64;
  for (auto _ : state) benchmark::DoNotOptimize(backend->generate("What is 17 times 6?"));
}
BENCHMARK(BM_TransformerGenerate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
