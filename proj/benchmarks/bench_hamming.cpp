// Retrieval hot path: packed code comparisons and linear database scans.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "asymhash/linalg.hpp"

using namespace asymhash;

namespace {

std::vector<BinaryCode> random_codes(std::size_t n, int bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<BinaryCode> codes;
  codes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> raw(bits);
    for (auto& b : raw) b = (rng() & 1) ? 1 : -1;
    codes.push_back(BinaryCode::from_bits(raw));
  }
  return codes;
}

void BM_HammingPair(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  const auto codes = random_codes(2, bits, 17);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hamming_distance(codes[0], codes[1]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HammingPair)->Arg(16)->Arg(64)->Arg(256);

void BM_DatabaseScan(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto db = random_codes(n, bits, 23);
  const auto query = random_codes(1, bits, 29);
  for (auto _ : state) {
    long total = 0;
    for (const BinaryCode& code : db) total += hamming_distance(query[0], code);
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DatabaseScan)->Args({16, 4096})->Args({64, 4096})->Args({64, 65536});

void BM_SignBinarize(benchmark::State& state) {
  const std::size_t bits = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> raw(bits);
  for (auto& x : raw) x = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sign_binarize(raw));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SignBinarize)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
