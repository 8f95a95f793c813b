#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "asymhash/errors.hpp"
#include "asymhash/linalg.hpp"

namespace asymhash {

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

/// Shape of the shared trunk plus the two linear heads hanging off it.
struct MlpConfig {
  std::vector<std::size_t> trunk_sizes;  // [input_dim, hidden_1, ..., hidden_T]
  std::size_t code_bits = 0;             // hash head width K
  std::size_t num_classes = 0;           // classification head width C
  std::vector<Activation> activations;   // per trunk layer; empty means all relu

  void validate() const;
};

/// Everything forward() computed for one item. Loss code reads feature(),
/// hash, and logits; backward() needs the rest to replay the chain rule.
struct ForwardRecord {
  RealVector input;
  std::vector<RealVector> pre;  // trunk pre-activations, one per layer
  std::vector<RealVector> act;  // trunk activations, same length
  RealVector hash;
  RealVector logits;

  const RealVector& feature() const { return act.back(); }
};

/// MLP with a shared trunk and two linear heads (hash codes and class
/// scores). Parameters live in one flat vector so optimizers and the
/// finite-difference checker can treat the network as a plain coordinate
/// list.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  MlpNetwork(const MlpConfig& config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.trunk_sizes.front(); }
  std::size_t feature_dim() const { return config_.trunk_sizes.back(); }
  std::size_t code_bits() const { return config_.code_bits; }
  std::size_t num_classes() const { return config_.num_classes; }

  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  ForwardRecord forward(std::span<const double> input) const;
  std::vector<ForwardRecord> forward_batch(const Matrix& inputs) const;

  /// Accumulates parameter gradients for one item into `grads` (flat, same
  /// layout as parameters()). d_feature, d_hash, d_logits are gradients of
  /// the loss w.r.t. the record's feature(), hash, and logits; an empty span
  /// stands for all zeros.
  void backward(const ForwardRecord& record, std::span<const double> d_feature,
                std::span<const double> d_hash, std::span<const double> d_logits,
                std::vector<double>& grads) const;

 private:
  struct LayerOffsets {
    std::size_t weight = 0;  // row-major out x in
    std::size_t bias = 0;
    std::size_t in = 0;
    std::size_t out = 0;
  };

  void build_layout();
  void affine(const LayerOffsets& layer, std::span<const double> x, RealVector& out) const;

  MlpConfig config_;
  std::vector<LayerOffsets> trunk_;
  LayerOffsets hash_head_;
  LayerOffsets cls_head_;
  std::vector<double> params_;
};

// ---- optimizers ----

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. State tensors are allocated lazily on the
/// first call and must keep matching params afterwards.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamParams& hp);

struct MomentumParams {
  double lr = 1e-2;
  double momentum = 0.9;
};

struct MomentumState {
  std::vector<double> velocity;
};

/// Classical momentum: v <- momentum*v + g, params <- params - lr*v.
void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       MomentumState& state, const MomentumParams& hp);

// ---- finite-difference gradient checking ----

/// FNV-1a accumulator over the discrete branch decisions a loss evaluation
/// makes (relu masks, active hinges, sign bits). Two evaluations with equal
/// signatures took the same path, so their central difference is smooth.
struct BranchHash {
  std::uint64_t state = 1469598103934665603ull;

  void feed(bool bit) {
    state ^= bit ? 0x9dull : 0x3bull;
    state *= 1099511628211ull;
  }
  void feed_relu_masks(const ForwardRecord& record) {
    for (const RealVector& layer : record.pre) {
      for (double v : layer) feed(v > 0.0);
    }
  }
};

/// One loss evaluation at the network's current parameters: value, analytic
/// gradient (flat layout), and the branch signature of the path taken.
struct LossSample {
  double loss = 0.0;
  std::vector<double> grads;
  std::uint64_t signature = 0;
};

using LossProbe = std::function<LossSample(const MlpNetwork&)>;

struct GradCheckOptions {
  double eps = 1e-6;
  double tolerance = 1e-4;
  std::size_t max_params = 0;  // 0 means every parameter
  std::uint64_t seed = 0;      // subsampling order when max_params > 0
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

/// Central-difference check of probe's analytic gradient. Parameters whose
/// +eps/-eps evaluations take different branch paths are skipped instead of
/// producing false alarms. Relative error uses max(1, |analytic|, |numeric|)
/// as the scale.
GradCheckReport finite_difference_check(MlpNetwork& net, const LossProbe& probe,
                                        const GradCheckOptions& opts);

// ---- checkpoints ----

void save_checkpoint(const MlpNetwork& net, const std::filesystem::path& path);
MlpNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace asymhash
