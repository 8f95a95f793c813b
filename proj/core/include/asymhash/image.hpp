#pragma once

#include <cstdint>
#include <vector>

#include "asymhash/dataset.hpp"
#include "asymhash/linalg.hpp"
#include "asymhash/mlp.hpp"
#include "asymhash/semantic.hpp"

namespace asymhash {

/// full: scalable margins + asymmetric dictionary terms.
/// sym: drops the two dictionary terms (gamma, mu effectively 0).
/// mars: every margin replaced by one fixed constant.
/// cos: the four hinge terms replaced by the pairwise log-posterior loss.
enum class ImageVariant { full, sym, mars, cos };

const char* to_string(ImageVariant v);
ImageVariant image_variant_from_string(const std::string& name);

/// Stage-2 trainer configuration for the feature network.
struct ImageNetConfig {
  MlpConfig net;
  double alpha = 0.01;  // feature-feature hinge
  double lambda = 1.0;  // hash-hash hinge
  double gamma = 0.01;  // feature-dictionary hinge
  double mu = 1.0;      // hash-dictionary hinge
  double eta = 2.0;     // classification term
  double beta = 0.05;   // quantization term
  ImageVariant variant = ImageVariant::full;
  double mars_margin = 0.5;             // fixed margin, mars variant only
  bool margins_from_features = false;   // margin source: codes (default) or features
  bool nearest_label_fallback = false;  // unseen labels map to nearest dictionary key
  int epochs = 60;
  std::size_t batch_size = 64;
  MomentumParams sgd;
  int lr_decay_every = 0;
  double lr_decay_factor = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// max(0, cosine of the two dictionary codes); the margin grows with shared
/// semantics and negative cosines floor at zero.
double scalable_margin(const BinaryCode& u_a, const BinaryCode& u_b);

/// Margins between every pair of dictionary entries, honoring the variant
/// and margin source. All entries lie in [0,1].
Matrix dictionary_pair_margins(const SemanticDictionary& dict, const ImageNetConfig& cfg);

/// Dictionary index per batch label: exact match, or nearest-by-label when
/// the config enables the fallback. Missing entries raise a lookup error.
std::vector<std::size_t> resolve_dictionary_indices(const std::vector<LabelVector>& labels,
                                                    const SemanticDictionary& dict,
                                                    const ImageNetConfig& cfg);

/// Pure margin hinge sum over a grid: 0.5*[S*max(M-cos,0)+(1-S)*max(M+cos,0)].
double j_ms(const std::vector<RealVector>& g1, const std::vector<RealVector>& g2,
            const Matrix& similar, const Matrix& margins);

/// Pairwise log-posterior loss on hash outputs with the half inner product
/// as logit; overflow-guarded.
double log_map_pairwise_loss(const std::vector<RealVector>& hashes, const Matrix& similar);

/// Unweighted term values; unused terms stay zero. total carries weights.
struct JImgComponents {
  double j_ff = 0.0;   // batch feature pairs
  double j_hh = 0.0;   // batch hash pairs
  double j_fq = 0.0;   // features against dictionary features
  double j_hu = 0.0;   // hashes against dictionary codes
  double j_cls = 0.0;  // ||logits - labels||^2
  double j_qnt = 0.0;  // ||hash - sign(hash)||^2
  double j_map = 0.0;  // log-posterior replacement (cos variant)
  double total = 0.0;

  void accumulate(const JImgComponents& other);
};

JImgComponents j_img_loss(const std::vector<ForwardRecord>& records,
                          const std::vector<LabelVector>& labels, const SemanticDictionary& dict,
                          const ImageNetConfig& cfg, BatchGrads* grads = nullptr,
                          BranchHash* signature = nullptr);

struct ImageTrainResult {
  MlpNetwork net;
  std::vector<JImgComponents> trace;  // per-epoch sums over batches
};

/// Mini-batch momentum SGD over the train split, dictionary frozen.
ImageTrainResult train_image(const MultiLabelDataset& ds,
                             const std::vector<std::uint32_t>& train_indices,
                             const SemanticDictionary& dict, const ImageNetConfig& cfg);

/// Probe for the finite-difference checker: J_Img on a fixed batch.
LossProbe make_jimg_probe(Matrix features, std::vector<LabelVector> labels,
                          SemanticDictionary dict, ImageNetConfig cfg);

}  // namespace asymhash
