#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "asymhash/dataset.hpp"
#include "asymhash/linalg.hpp"
#include "asymhash/mlp.hpp"

namespace asymhash {

/// Stage-1 trainer configuration: the label network learns to hash its own
/// annotations, so the net's input width and class head both equal the
/// number of classes.
struct SemanticNetConfig {
  MlpConfig net;
  double alpha = 2.0;   // feature-space pairwise hinge
  double lambda = 0.5;  // hash-space pairwise hinge
  double eta = 0.5;     // classification term
  double beta = 0.1;    // quantization term
  double margin = 0.0;  // fixed hinge margin, in [0,1]
  int epochs = 60;
  std::size_t batch_size = 64;
  AdamParams adam;
  int lr_decay_every = 0;       // epochs between decays; 0 disables
  double lr_decay_factor = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Unweighted values of the four loss terms; total carries the weights.
struct JLabComponents {
  double j1 = 0.0;  // pairwise hinge on features
  double j2 = 0.0;  // pairwise hinge on hash outputs
  double j3 = 0.0;  // ||logits - labels||^2
  double j4 = 0.0;  // ||hash - sign(hash)||^2
  double total = 0.0;

  void accumulate(const JLabComponents& other);
};

/// Per-item loss gradients for one batch, indexed like the record list.
struct BatchGrads {
  std::vector<RealVector> d_feature;
  std::vector<RealVector> d_hash;
  std::vector<RealVector> d_logits;

  void reset(std::size_t batch, std::size_t feature_dim, std::size_t code_bits,
             std::size_t num_classes);
};

/// Loss over one batch, every ordered pair including i=j. Pass `grads` to
/// also collect d/dF, d/dH, d/dlogits per item; pass `signature` to fold the
/// hinge and sign branch decisions into a path hash.
JLabComponents j_lab_loss(const std::vector<ForwardRecord>& records,
                          const std::vector<LabelVector>& labels, const SemanticNetConfig& cfg,
                          BatchGrads* grads = nullptr, BranchHash* signature = nullptr);

struct SemanticTrainResult {
  MlpNetwork net;
  std::vector<JLabComponents> trace;  // per-epoch sums over batches
};

/// Mini-batch Adam on the label network. Deterministic for a fixed config.
SemanticTrainResult train_semantic(const std::vector<LabelVector>& labels,
                                   const SemanticNetConfig& cfg);

struct DictEntry {
  LabelVector label;
  BinaryCode code;     // sign-binarized hash output
  RealVector feature;  // real-valued semantic feature
};

struct LabelVectorHash {
  std::size_t operator()(const LabelVector& label) const;
};

/// Deduplicated label -> (code, feature) table in first-occurrence order.
/// Stage 2 addresses it by exact label match; nearest_by_label exists for
/// deliberately enabled fallback lookups only.
class SemanticDictionary {
 public:
  std::size_t size() const { return entries_.size(); }
  const std::vector<DictEntry>& entries() const { return entries_; }
  const DictEntry& entry(std::size_t i) const { return entries_[i]; }

  /// First-occurrence insert; duplicates are ignored. Returns the index.
  std::size_t add(DictEntry entry);

  const DictEntry* find(const LabelVector& label) const;
  const DictEntry& find_or_throw(const LabelVector& label) const;
  std::size_t index_of(const LabelVector& label) const;  // LookupError if absent

  /// Smallest label-vector Hamming distance, ties to the lowest index.
  const DictEntry& nearest_by_label(const LabelVector& label) const;

 private:
  std::vector<DictEntry> entries_;
  std::unordered_map<LabelVector, std::size_t, LabelVectorHash> index_;
};

/// One forward pass per distinct training label; u = sign(H), q = F.
SemanticDictionary build_dictionaries(const MlpNetwork& net,
                                      const std::vector<LabelVector>& labels);

/// CSV with self-describing header (l*, u*, q* columns); exact round trip.
void save_dictionary(const SemanticDictionary& dict, const std::filesystem::path& path);
SemanticDictionary load_dictionary(const std::filesystem::path& path);

/// Probe for the finite-difference checker: J_Lab on a fixed label batch.
LossProbe make_jlab_probe(std::vector<LabelVector> labels, SemanticNetConfig cfg);

}  // namespace asymhash
