#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "asymhash/mlp.hpp"

using namespace asymhash;
namespace fs = std::filesystem;

namespace {

MlpConfig tiny_config() {
  MlpConfig config;
  config.trunk_sizes = {3, 4};
  config.code_bits = 2;
  config.num_classes = 2;
  return config;
}

// Quadratic in all three outputs: smooth everywhere, exercises every path.
LossSample quadratic_probe(const MlpNetwork& net, const Matrix& inputs) {
  LossSample sample;
  sample.grads.assign(net.param_count(), 0.0);
  BranchHash sig;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    ForwardRecord record = net.forward(inputs.row(r));
    sig.feed_relu_masks(record);
    const RealVector& f = record.feature();
    for (double v : f) sample.loss += 0.5 * v * v;
    for (double v : record.hash) sample.loss += 0.5 * v * v;
    for (double v : record.logits) sample.loss += 0.5 * v * v;
    net.backward(record, f, record.hash, record.logits, sample.grads);
  }
  sample.signature = sig.state;
  return sample;
}

}  // namespace

TEST_CASE("config validation") {
  MlpConfig config = tiny_config();
  CHECK_NOTHROW(config.validate());

  MlpConfig no_trunk = config;
  no_trunk.trunk_sizes = {3};
  CHECK_THROWS_AS(no_trunk.validate(), ConfigError);

  MlpConfig zero_width = config;
  zero_width.trunk_sizes = {3, 0};
  CHECK_THROWS_AS(zero_width.validate(), ConfigError);

  MlpConfig no_code = config;
  no_code.code_bits = 0;
  CHECK_THROWS_AS(no_code.validate(), ConfigError);

  MlpConfig bad_acts = config;
  bad_acts.activations = {Activation::relu, Activation::relu};
  CHECK_THROWS_AS(bad_acts.validate(), ConfigError);
}

TEST_CASE("initialization is seeded and Glorot-bounded") {
  MlpConfig config;
  config.trunk_sizes = {5, 7, 4};
  config.code_bits = 3;
  config.num_classes = 2;

  MlpNetwork a(config, 42);
  MlpNetwork b(config, 42);
  CHECK(a.parameters() == b.parameters());

  MlpNetwork c(config, 43);
  CHECK_FALSE(a.parameters() == c.parameters());

  // The loosest layer bound covers every weight; biases start at zero.
  const double loosest = std::sqrt(6.0 / (4 + 2));
  bool any_nonzero = false;
  for (double w : a.parameters()) {
    CHECK(std::abs(w) <= loosest);
    any_nonzero = any_nonzero || w != 0.0;
  }
  CHECK(any_nonzero);
}

TEST_CASE("forward computes the affine chain by hand") {
  MlpConfig config;
  config.trunk_sizes = {2, 2};
  config.code_bits = 1;
  config.num_classes = 2;
  config.activations = {Activation::linear};

  MlpNetwork net(config, 0);
  // Layout: trunk W(2x2), trunk b(2), hash W(1x2), hash b(1), cls W(2x2), cls b(2).
  net.parameters() = {1.0, 2.0, -1.0, 0.5,  // trunk W rows
                      0.1, -0.2,            // trunk b
                      3.0, -1.0,            // hash W
                      0.5,                  // hash b
                      1.0, 0.0, 0.0, 1.0,   // cls W
                      0.0, 0.0};            // cls b

  ForwardRecord record = net.forward(RealVector{1.0, -1.0});
  REQUIRE(record.act.size() == 1);
  CHECK(record.feature()[0] == doctest::Approx(1.0 - 2.0 + 0.1));
  CHECK(record.feature()[1] == doctest::Approx(-1.0 - 0.5 - 0.2));
  CHECK(record.hash[0] == doctest::Approx(3.0 * (-0.9) - 1.0 * (-1.7) + 0.5));
  CHECK(record.logits[0] == doctest::Approx(-0.9));
  CHECK(record.logits[1] == doctest::Approx(-1.7));

  CHECK_THROWS_AS(net.forward(RealVector{1.0}), DimensionError);
}

TEST_CASE("relu zeroes negative preactivations but keeps them in pre") {
  MlpConfig config;
  config.trunk_sizes = {1, 2};
  config.code_bits = 1;
  config.num_classes = 1;

  MlpNetwork net(config, 0);
  net.parameters() = {1.0, -1.0,  // trunk W
                      0.0, 0.0,   // trunk b
                      1.0, 1.0,   // hash W
                      0.0,        // hash b
                      1.0, 1.0,   // cls W
                      0.0};       // cls b
  ForwardRecord record = net.forward(RealVector{2.0});
  CHECK(record.pre[0][0] == 2.0);
  CHECK(record.pre[0][1] == -2.0);
  CHECK(record.act[0][0] == 2.0);
  CHECK(record.act[0][1] == 0.0);
  CHECK(record.hash[0] == doctest::Approx(2.0));
}

TEST_CASE("backward agrees with a naive central difference") {
  MlpConfig config;
  config.trunk_sizes = {3, 5, 4};
  config.code_bits = 3;
  config.num_classes = 2;

  MlpNetwork net(config, 7);
  Matrix inputs(4, 3);
  std::mt19937_64 rng(88);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    for (std::size_t c = 0; c < inputs.cols(); ++c) inputs(r, c) = normal(rng);
  }

  const LossSample base = quadratic_probe(net, inputs);
  REQUIRE(base.grads.size() == net.param_count());

  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double saved = net.parameters()[i];
    net.parameters()[i] = saved + eps;
    const LossSample plus = quadratic_probe(net, inputs);
    net.parameters()[i] = saved - eps;
    const LossSample minus = quadratic_probe(net, inputs);
    net.parameters()[i] = saved;
    if (plus.signature != minus.signature) continue;  // relu kink straddled
    const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
    const double rel = std::abs(base.grads[i] - numeric) /
                       std::max({1.0, std::abs(base.grads[i]), std::abs(numeric)});
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("empty gradient spans mean zero upstream gradient") {
  MlpConfig config = tiny_config();
  MlpNetwork net(config, 3);
  ForwardRecord record = net.forward(RealVector{0.3, -0.4, 0.9});

  std::vector<double> only_hash(net.param_count(), 0.0);
  net.backward(record, {}, record.hash, {}, only_hash);

  std::vector<double> explicit_zeros(net.param_count(), 0.0);
  RealVector zf(net.feature_dim(), 0.0), zl(net.num_classes(), 0.0);
  net.backward(record, zf, record.hash, zl, explicit_zeros);
  CHECK(only_hash == explicit_zeros);

  std::vector<double> wrong(net.param_count() + 1, 0.0);
  CHECK_THROWS_AS(net.backward(record, {}, record.hash, {}, wrong), DimensionError);
  RealVector bad(net.code_bits() + 1, 0.0);
  std::vector<double> g(net.param_count(), 0.0);
  CHECK_THROWS_AS(net.backward(record, {}, bad, {}, g), DimensionError);
}

TEST_CASE("adam first step has magnitude lr regardless of gradient scale") {
  for (double g : {1e-8, 1e-3, 1.0, 1e4}) {
    std::vector<double> params{0.0};
    std::vector<double> grads{g};
    AdamState state;
    AdamParams hp;
    adam_step(params, grads, state, hp);
    // m_hat/sqrt(v_hat) == sign(g) up to the eps guard.
    CHECK(params[0] == doctest::Approx(-hp.lr).epsilon(1e-3));
  }
}

TEST_CASE("adam matches a scalar reference across steps") {
  AdamParams hp;
  hp.lr = 0.05;
  std::vector<double> params{0.7};
  AdamState state;

  // Scalar re-derivation, kept independent of the implementation.
  double x = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    const double g = 2.0 * x + std::sin(static_cast<double>(t));
    std::vector<double> grads{2.0 * params[0] + std::sin(static_cast<double>(t))};
    adam_step(params, grads, state, hp);

    m = hp.beta1 * m + (1 - hp.beta1) * g;
    v = hp.beta2 * v + (1 - hp.beta2) * g * g;
    const double m_hat = m / (1 - std::pow(hp.beta1, t));
    const double v_hat = v / (1 - std::pow(hp.beta2, t));
    x -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    CHECK(params[0] == doctest::Approx(x).epsilon(1e-12));
  }
  CHECK(state.t == 25);
}

TEST_CASE("momentum velocity compounds across steps") {
  std::vector<double> params{0.0};
  MomentumState state;
  MomentumParams hp;
  hp.lr = 0.1;
  hp.momentum = 0.9;

  std::vector<double> grads{1.0};
  sgd_momentum_step(params, grads, state, hp);
  CHECK(params[0] == doctest::Approx(-0.1));
  sgd_momentum_step(params, grads, state, hp);
  // Second velocity is 0.9*1 + 1 = 1.9, so the step is lr*1.9.
  CHECK(params[0] == doctest::Approx(-0.1 - 0.19));

  std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(sgd_momentum_step(bad, grads, state, hp), DimensionError);
}

TEST_CASE("finite_difference_check passes a smooth probe") {
  MlpConfig config;
  config.trunk_sizes = {3, 6, 4};
  config.code_bits = 4;
  config.num_classes = 3;
  MlpNetwork net(config, 11);

  Matrix inputs(5, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    for (std::size_t c = 0; c < inputs.cols(); ++c) inputs(r, c) = normal(rng);
  }

  GradCheckOptions opts;
  GradCheckReport report = finite_difference_check(
      net, [&](const MlpNetwork& n) { return quadratic_probe(n, inputs); }, opts);
  CHECK(report.passed);
  CHECK(report.checked > 0);
  CHECK(report.max_rel_error <= opts.tolerance);

  GradCheckOptions subsample = opts;
  subsample.max_params = 10;
  GradCheckReport small = finite_difference_check(
      net, [&](const MlpNetwork& n) { return quadratic_probe(n, inputs); }, subsample);
  CHECK(small.checked + small.skipped_kinks == 10);
}

TEST_CASE("finite_difference_check skips parameters sitting on a relu kink") {
  MlpConfig config;
  config.trunk_sizes = {1, 1};
  config.code_bits = 1;
  config.num_classes = 1;
  MlpNetwork net(config, 0);
  // All zeros: the single preactivation sits exactly on the kink, so the
  // trunk weight and bias flip the relu mask at +-eps.
  std::fill(net.parameters().begin(), net.parameters().end(), 0.0);

  Matrix inputs(1, 1);
  inputs(0, 0) = 1.0;
  GradCheckReport report = finite_difference_check(
      net, [&](const MlpNetwork& n) { return quadratic_probe(n, inputs); }, GradCheckOptions{});
  CHECK(report.skipped_kinks == 2);
  CHECK(report.checked == net.param_count() - 2);
  CHECK(report.passed);
}

TEST_CASE("finite_difference_check names a corrupted gradient entry") {
  MlpConfig config = tiny_config();
  MlpNetwork net(config, 21);
  Matrix inputs(3, 3);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    for (std::size_t c = 0; c < inputs.cols(); ++c) inputs(r, c) = normal(rng);
  }

  // Find the largest honest gradient, then double exactly that entry.
  const LossSample honest = quadratic_probe(net, inputs);
  std::size_t target = 0;
  for (std::size_t i = 1; i < honest.grads.size(); ++i) {
    if (std::abs(honest.grads[i]) > std::abs(honest.grads[target])) target = i;
  }
  REQUIRE(std::abs(honest.grads[target]) > 0.01);

  auto corrupted = [&](const MlpNetwork& n) {
    LossSample s = quadratic_probe(n, inputs);
    s.grads[target] *= 2.0;
    return s;
  };
  GradCheckReport report = finite_difference_check(net, corrupted, GradCheckOptions{});
  CHECK_FALSE(report.passed);
  CHECK(report.worst_param == target);
}

TEST_CASE("heads do not interfere") {
  MlpConfig config;
  config.trunk_sizes = {3, 5};
  config.code_bits = 2;
  config.num_classes = 4;
  MlpNetwork net(config, 31);
  RealVector input{0.4, -0.6, 1.1};
  const ForwardRecord before = net.forward(input);

  // Flat layout is trunk, then hash head, then class head.
  const std::size_t trunk = (3 + 1) * 5;
  const std::size_t hash_block = (5 + 1) * 2;
  const std::size_t cls_block = (5 + 1) * 4;
  REQUIRE(net.param_count() == trunk + hash_block + cls_block);

  MlpNetwork poked_cls = net;
  for (std::size_t i = trunk + hash_block; i < net.param_count(); ++i) {
    poked_cls.parameters()[i] += 0.37;
  }
  CHECK(poked_cls.forward(input).hash == before.hash);
  CHECK_FALSE(poked_cls.forward(input).logits == before.logits);

  MlpNetwork poked_hash = net;
  for (std::size_t i = trunk; i < trunk + hash_block; ++i) {
    poked_hash.parameters()[i] += 0.37;
  }
  CHECK(poked_hash.forward(input).logits == before.logits);
  CHECK_FALSE(poked_hash.forward(input).hash == before.hash);
}

TEST_CASE("zero upstream gradient gives zero parameter gradient, zero grad leaves adam params") {
  MlpNetwork net(tiny_config(), 13);
  ForwardRecord record = net.forward(RealVector{1.0, 2.0, 3.0});
  std::vector<double> grads(net.param_count(), 0.0);
  net.backward(record, {}, {}, {}, grads);
  for (double g : grads) CHECK(g == 0.0);

  std::vector<double> params{1.5, -2.5};
  std::vector<double> zero{0.0, 0.0};
  AdamState state;
  adam_step(params, zero, state, AdamParams{});
  CHECK(params[0] == 1.5);
  CHECK(params[1] == -2.5);
  MomentumState mstate;
  sgd_momentum_step(params, zero, mstate, MomentumParams{});
  CHECK(params[0] == 1.5);
}

TEST_CASE("probe gradient size is enforced") {
  MlpNetwork net(tiny_config(), 1);
  auto bad_probe = [](const MlpNetwork&) {
    LossSample s;
    s.grads = {1.0, 2.0};
    return s;
  };
  CHECK_THROWS_AS(finite_difference_check(net, bad_probe, GradCheckOptions{}), DimensionError);
}

TEST_CASE("checkpoint round trip preserves shape and parameters") {
  MlpConfig config;
  config.trunk_sizes = {4, 6, 3};
  config.code_bits = 5;
  config.num_classes = 4;
  config.activations = {Activation::relu, Activation::linear};
  MlpNetwork net(config, 77);

  fs::path path = fs::temp_directory_path() / "asymhash_ckpt_test.bin";
  save_checkpoint(net, path);
  MlpNetwork back = load_checkpoint(path);
  CHECK(back.config().trunk_sizes == config.trunk_sizes);
  CHECK(back.config().code_bits == config.code_bits);
  CHECK(back.config().num_classes == config.num_classes);
  CHECK(back.config().activations == config.activations);
  CHECK(back.parameters() == net.parameters());

  RealVector input{0.1, -0.2, 0.3, 0.4};
  CHECK(back.forward(input).hash == net.forward(input).hash);
  fs::remove(path);
}

TEST_CASE("checkpoint loader rejects damage") {
  MlpNetwork net(tiny_config(), 9);
  fs::path path = fs::temp_directory_path() / "asymhash_ckpt_damage.bin";
  save_checkpoint(net, path);

  // Flip the magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  save_checkpoint(net, path);
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 9);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "missing.bin"), ParseError);
  fs::remove(path);
}

TEST_CASE("branch hash separates different decision paths") {
  BranchHash a, b, c;
  for (bool bit : {true, false, true}) a.feed(bit);
  for (bool bit : {true, false, true}) b.feed(bit);
  for (bool bit : {true, true, true}) c.feed(bit);
  CHECK(a.state == b.state);
  CHECK(a.state != c.state);
  CHECK(a.state != BranchHash{}.state);
}
