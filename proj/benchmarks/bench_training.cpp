// Training hot path: batch forward passes and the two batch objectives with
// gradient accumulation, at the shapes the experiment layer uses.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "asymhash/image.hpp"
#include "asymhash/semantic.hpp"

using namespace asymhash;

namespace {

constexpr std::size_t kBatch = 64;
constexpr std::size_t kClasses = 8;
constexpr std::size_t kBits = 32;

std::vector<LabelVector> label_pool() {
  // Eight distinct single-label vectors so every item resolves in a dictionary.
  std::vector<LabelVector> pool;
  for (std::size_t c = 0; c < kClasses; ++c) {
    LabelVector l(kClasses, 0);
    l[c] = 1;
    pool.push_back(l);
  }
  return pool;
}

std::vector<LabelVector> batch_labels(std::uint64_t seed) {
  const auto pool = label_pool();
  std::mt19937_64 rng(seed);
  std::vector<LabelVector> labels;
  for (std::size_t i = 0; i < kBatch; ++i) labels.push_back(pool[rng() % pool.size()]);
  return labels;
}

Matrix random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

void BM_ForwardBatch(benchmark::State& state) {
  MlpConfig mc;
  mc.trunk_sizes = {32, 256, 128};
  mc.code_bits = kBits;
  mc.num_classes = kClasses;
  const MlpNetwork net(mc, 41);
  const Matrix inputs = random_inputs(kBatch, 32, 43);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward_batch(inputs));
  }
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_ForwardBatch);

void BM_LabelLossWithGrads(benchmark::State& state) {
  SemanticNetConfig sc;
  sc.net.trunk_sizes = {kClasses, 256, 128};
  sc.net.code_bits = kBits;
  sc.net.num_classes = kClasses;
  const MlpNetwork net(sc.net, 47);

  const auto labels = batch_labels(53);
  Matrix inputs(kBatch, kClasses);
  for (std::size_t i = 0; i < kBatch; ++i) {
    for (std::size_t j = 0; j < kClasses; ++j) inputs(i, j) = labels[i][j];
  }
  const auto records = net.forward_batch(inputs);

  BatchGrads grads;
  for (auto _ : state) {
    grads.reset(kBatch, 128, kBits, kClasses);
    benchmark::DoNotOptimize(j_lab_loss(records, labels, sc, &grads));
  }
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_LabelLossWithGrads);

void BM_FeatureLossWithGrads(benchmark::State& state) {
  ImageNetConfig ic;
  ic.variant = static_cast<ImageVariant>(state.range(0));
  ic.net.trunk_sizes = {32, 256, 128};
  ic.net.code_bits = kBits;
  ic.net.num_classes = kClasses;
  const MlpNetwork net(ic.net, 59);

  SemanticDictionary dict;
  std::mt19937_64 rng(61);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const LabelVector& label : label_pool()) {
    std::vector<int> raw(kBits);
    for (auto& b : raw) b = (rng() & 1) ? 1 : -1;
    RealVector q(128);
    for (auto& x : q) x = normal(rng);
    dict.add({label, BinaryCode::from_bits(raw), q});
  }

  const auto labels = batch_labels(67);
  const auto records = net.forward_batch(random_inputs(kBatch, 32, 71));

  BatchGrads grads;
  for (auto _ : state) {
    grads.reset(kBatch, 128, kBits, kClasses);
    benchmark::DoNotOptimize(j_img_loss(records, labels, dict, ic, &grads));
  }
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_FeatureLossWithGrads)
    ->Arg(static_cast<int>(ImageVariant::full))
    ->Arg(static_cast<int>(ImageVariant::sym))
    ->Arg(static_cast<int>(ImageVariant::mars));

}  // namespace

BENCHMARK_MAIN();
