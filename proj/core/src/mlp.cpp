#include "asymhash/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

namespace asymhash {

void MlpConfig::validate() const {
  if (trunk_sizes.size() < 2) {
    throw ConfigError("mlp: need an input size and at least one trunk layer");
  }
  for (std::size_t s : trunk_sizes) {
    if (s < 1) throw ConfigError("mlp: zero-width layer");
  }
  if (code_bits < 1) throw ConfigError("mlp: code_bits must be >= 1");
  if (num_classes < 1) throw ConfigError("mlp: num_classes must be >= 1");
  if (!activations.empty() && activations.size() != trunk_sizes.size() - 1) {
    throw ConfigError("mlp: " + std::to_string(activations.size()) + " activations for " +
                      std::to_string(trunk_sizes.size() - 1) + " trunk layers");
  }
}

MlpNetwork::MlpNetwork(const MlpConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (config_.activations.empty()) {
    config_.activations.assign(config_.trunk_sizes.size() - 1, Activation::relu);
  }
  build_layout();

  // Glorot-uniform weights, zero biases. Draw order is fixed (trunk front to
  // back, then hash head, then class head) so a seed pins the whole init.
  std::mt19937_64 rng(seed);
  auto fill = [&](const LayerOffsets& layer) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) params_[layer.weight + i] = dist(rng);
  };
  for (const LayerOffsets& layer : trunk_) fill(layer);
  fill(hash_head_);
  fill(cls_head_);
}

void MlpNetwork::build_layout() {
  std::size_t offset = 0;
  auto claim = [&offset](std::size_t in, std::size_t out) {
    LayerOffsets layer;
    layer.in = in;
    layer.out = out;
    layer.weight = offset;
    offset += in * out;
    layer.bias = offset;
    offset += out;
    return layer;
  };
  trunk_.clear();
  for (std::size_t l = 0; l + 1 < config_.trunk_sizes.size(); ++l) {
    trunk_.push_back(claim(config_.trunk_sizes[l], config_.trunk_sizes[l + 1]));
  }
  hash_head_ = claim(config_.trunk_sizes.back(), config_.code_bits);
  cls_head_ = claim(config_.trunk_sizes.back(), config_.num_classes);
  params_.assign(offset, 0.0);
}

void MlpNetwork::affine(const LayerOffsets& layer, std::span<const double> x,
                        RealVector& out) const {
  out.assign(layer.out, 0.0);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* w = params_.data() + layer.weight + o * layer.in;
    double sum = params_[layer.bias + o];
    for (std::size_t i = 0; i < layer.in; ++i) sum += w[i] * x[i];
    out[o] = sum;
  }
}

ForwardRecord MlpNetwork::forward(std::span<const double> input) const {
  if (input.size() != input_dim()) {
    throw DimensionError("mlp forward: input has " + std::to_string(input.size()) +
                         " components, network expects " + std::to_string(input_dim()));
  }
  ForwardRecord record;
  record.input.assign(input.begin(), input.end());
  record.pre.resize(trunk_.size());
  record.act.resize(trunk_.size());

  std::span<const double> x = record.input;
  for (std::size_t l = 0; l < trunk_.size(); ++l) {
    affine(trunk_[l], x, record.pre[l]);
    record.act[l] = record.pre[l];
    if (config_.activations[l] == Activation::relu) {
      for (double& v : record.act[l]) v = v > 0.0 ? v : 0.0;
    }
    x = record.act[l];
  }
  affine(hash_head_, x, record.hash);
  affine(cls_head_, x, record.logits);
  return record;
}

std::vector<ForwardRecord> MlpNetwork::forward_batch(const Matrix& inputs) const {
  std::vector<ForwardRecord> records;
  records.reserve(inputs.rows());
  for (std::size_t r = 0; r < inputs.rows(); ++r) records.push_back(forward(inputs.row(r)));
  return records;
}

void MlpNetwork::backward(const ForwardRecord& record, std::span<const double> d_feature,
                          std::span<const double> d_hash, std::span<const double> d_logits,
                          std::vector<double>& grads) const {
  if (grads.size() != params_.size()) {
    throw DimensionError("mlp backward: gradient buffer has wrong size");
  }
  if (!d_feature.empty() && d_feature.size() != feature_dim()) {
    throw DimensionError("mlp backward: d_feature size mismatch");
  }
  if (!d_hash.empty() && d_hash.size() != code_bits()) {
    throw DimensionError("mlp backward: d_hash size mismatch");
  }
  if (!d_logits.empty() && d_logits.size() != num_classes()) {
    throw DimensionError("mlp backward: d_logits size mismatch");
  }

  const RealVector& feature = record.feature();

  // d(loss)/d(feature) collects the direct term plus both head pullbacks.
  RealVector d_act(feature.size(), 0.0);
  if (!d_feature.empty()) std::copy(d_feature.begin(), d_feature.end(), d_act.begin());

  auto head_backward = [&](const LayerOffsets& head, std::span<const double> d_out) {
    if (d_out.empty()) return;
    for (std::size_t o = 0; o < head.out; ++o) {
      const double g = d_out[o];
      if (g == 0.0) continue;
      double* gw = grads.data() + head.weight + o * head.in;
      const double* w = params_.data() + head.weight + o * head.in;
      for (std::size_t i = 0; i < head.in; ++i) {
        gw[i] += g * feature[i];
        d_act[i] += g * w[i];
      }
      grads[head.bias + o] += g;
    }
  };
  head_backward(hash_head_, d_hash);
  head_backward(cls_head_, d_logits);

  // Trunk, last layer first. d_act enters layer l as the gradient at act[l].
  for (std::size_t l = trunk_.size(); l-- > 0;) {
    const LayerOffsets& layer = trunk_[l];
    RealVector d_pre = std::move(d_act);
    if (config_.activations[l] == Activation::relu) {
      // Subgradient 0 at the kink, matching the forward mask pre > 0.
      for (std::size_t o = 0; o < layer.out; ++o) {
        if (!(record.pre[l][o] > 0.0)) d_pre[o] = 0.0;
      }
    }
    std::span<const double> below = l == 0 ? std::span<const double>(record.input)
                                           : std::span<const double>(record.act[l - 1]);
    d_act.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = d_pre[o];
      grads[layer.bias + o] += g;
      if (g == 0.0) continue;
      double* gw = grads.data() + layer.weight + o * layer.in;
      const double* w = params_.data() + layer.weight + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        gw[i] += g * below[i];
        d_act[i] += g * w[i];
      }
    }
  }
}

// ---- optimizers ----

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamParams& hp) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: params/grads size mismatch");
  }
  if (state.m.empty() && state.t == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state does not match params");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       MomentumState& state, const MomentumParams& hp) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_momentum_step: params/grads size mismatch");
  }
  if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
  if (state.velocity.size() != params.size()) {
    throw DimensionError("sgd_momentum_step: velocity does not match params");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = hp.momentum * state.velocity[i] + grads[i];
    params[i] -= hp.lr * state.velocity[i];
  }
}

// ---- finite-difference gradient checking ----

GradCheckReport finite_difference_check(MlpNetwork& net, const LossProbe& probe,
                                        const GradCheckOptions& opts) {
  if (opts.eps <= 0.0) throw ConfigError("finite_difference_check: eps must be > 0");

  const LossSample base = probe(net);
  if (!std::isfinite(base.loss)) {
    throw NumericError("finite_difference_check: probe returned a non-finite loss");
  }
  if (base.grads.size() != net.param_count()) {
    throw DimensionError("finite_difference_check: probe returned " +
                         std::to_string(base.grads.size()) + " gradients for " +
                         std::to_string(net.param_count()) + " parameters");
  }

  std::vector<std::size_t> order(net.param_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (opts.max_params > 0 && opts.max_params < order.size()) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(opts.max_params);
  }

  GradCheckReport report;
  std::vector<double>& params = net.parameters();
  for (std::size_t idx : order) {
    const double saved = params[idx];
    params[idx] = saved + opts.eps;
    const LossSample plus = probe(net);
    params[idx] = saved - opts.eps;
    const LossSample minus = probe(net);
    params[idx] = saved;
    if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
      throw NumericError("finite_difference_check: non-finite loss near parameter " +
                         std::to_string(idx));
    }

    // Different branch paths at +-eps straddle a kink; the quotient there
    // measures the kink, not the gradient.
    if (plus.signature != minus.signature) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * opts.eps);
    const double analytic = base.grads[idx];
    const double rel =
        std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = idx;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[4] = {'A', 'H', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("checkpoint " + path.string() + ": truncated");
  return value;
}

}  // namespace

void save_checkpoint(const MlpNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const MlpConfig& config = net.config();
  write_pod(out, static_cast<std::uint32_t>(config.trunk_sizes.size()));
  for (std::size_t s : config.trunk_sizes) write_pod(out, static_cast<std::uint32_t>(s));
  write_pod(out, static_cast<std::uint32_t>(config.code_bits));
  write_pod(out, static_cast<std::uint32_t>(config.num_classes));
  for (Activation a : config.activations) write_pod(out, static_cast<std::uint8_t>(a));
  write_pod(out, static_cast<std::uint64_t>(net.param_count()));
  // Raw doubles; the file format is native little-endian.
  out.write(reinterpret_cast<const char*>(net.parameters().data()),
            static_cast<std::streamsize>(net.param_count() * sizeof(double)));
  if (!out) throw ParseError("short write on checkpoint " + path.string());
}

MlpNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw ParseError("checkpoint " + path.string() + ": unsupported version " +
                     std::to_string(version));
  }
  MlpConfig config;
  const auto n_sizes = read_pod<std::uint32_t>(in, path);
  if (n_sizes < 2 || n_sizes > 64) {
    throw ParseError("checkpoint " + path.string() + ": implausible layer count");
  }
  config.trunk_sizes.resize(n_sizes);
  for (auto& s : config.trunk_sizes) s = read_pod<std::uint32_t>(in, path);
  config.code_bits = read_pod<std::uint32_t>(in, path);
  config.num_classes = read_pod<std::uint32_t>(in, path);
  config.activations.resize(n_sizes - 1);
  for (auto& a : config.activations) {
    const auto raw = read_pod<std::uint8_t>(in, path);
    if (raw > 1) throw ParseError("checkpoint " + path.string() + ": unknown activation");
    a = static_cast<Activation>(raw);
  }
  const auto count = read_pod<std::uint64_t>(in, path);

  MlpNetwork net(config, /*seed=*/0);
  if (count != net.param_count()) {
    throw ParseError("checkpoint " + path.string() + ": parameter count " +
                     std::to_string(count) + " does not match shape");
  }
  in.read(reinterpret_cast<char*>(net.parameters().data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ParseError("checkpoint " + path.string() + ": truncated parameters");
  return net;
}

}  // namespace asymhash
