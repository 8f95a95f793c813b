#pragma once

// Multi-modal extension: one feature network per modality, each trained
// independently against the shared label-code and label-feature
// dictionaries, then evaluated across modalities (queries from one, database
// from another).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asymhash/dataset.hpp"
#include "asymhash/eval.hpp"
#include "asymhash/image.hpp"

namespace asymhash {

/// Items described in several feature spaces at once, sharing one label
/// matrix and one id list.
struct BiModalDataset {
  struct Modality {
    std::string name;
    Matrix features;  // m x d_j, width may differ per modality
  };

  std::vector<Modality> modalities;
  std::vector<LabelVector> labels;
  std::vector<std::uint32_t> ids;

  std::size_t size() const { return labels.size(); }

  /// Checks that every modality has one row per item and that labels and
  /// ids satisfy the single-modality rules. Throws DataError.
  void validate() const;

  /// The named modality viewed as a plain dataset (features copied, labels
  /// and ids shared values). Throws LookupError on an unknown name.
  MultiLabelDataset modality_view(std::size_t index) const;
  std::size_t modality_index(const std::string& name) const;
};

struct TextModalityParams {
  std::size_t dim = 64;          // vocabulary size of the bag-of-words stand-in
  double active_fraction = 0.1;  // fraction of the vocabulary a class activates
  double noise_sigma = 0.05;     // additive Gaussian noise on active entries
  std::uint64_t seed = 1;
};

/// Synthetic second modality: each class activates a sparse random subset of
/// the vocabulary, an item sums the activations of its classes, and noise is
/// added on top. Deterministic per seed. Throws ConfigError on bad params.
Matrix generate_text_modality(const std::vector<LabelVector>& labels,
                              const TextModalityParams& params);

/// A plain dataset paired with a generated text modality, ready for
/// two-modality experiments.
BiModalDataset attach_text_modality(const MultiLabelDataset& ds, const std::string& first_name,
                                    const TextModalityParams& params);

struct CrossModalTrainResult {
  std::vector<std::string> modality_names;
  std::vector<ImageTrainResult> runs;  // one per modality, same order
};

/// Trains one network per modality on the shared training rows. Modalities
/// never exchange gradients; they are coupled only through the frozen
/// dictionaries. With a single modality this is exactly the single-modality
/// training call. Throws ConfigError when the config count does not match
/// the modality count.
CrossModalTrainResult train_crossmodal(const BiModalDataset& ds,
                                       std::span<const std::uint32_t> train_indices,
                                       const SemanticDictionary& dict,
                                       std::span<const ImageNetConfig> cfgs);

/// Encodes split.query with net_query on one modality and split.database
/// with net_db on another, then scores the ranking. Equal modalities give
/// the single-modality evaluation. Throws DimensionError when the two
/// networks emit different code lengths.
RetrievalRun crossmodal_eval(const MlpNetwork& net_query, std::size_t query_modality,
                             const MlpNetwork& net_db, std::size_t db_modality,
                             const BiModalDataset& ds, const SplitSpec& split,
                             std::size_t cutoff = kCutoffAll);

}  // namespace asymhash
