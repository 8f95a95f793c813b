#pragma once

// Dataset representation, label-derived similarity oracles, query/train/
// database splits, synthetic multi-label generation and CSV persistence.
// Datasets are immutable after construction and can be shared across threads.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asymhash/linalg.hpp"

namespace asymhash {

struct MultiLabelDataset {
  Matrix features;                    // m x d_v
  std::vector<LabelVector> labels;    // m rows, each of length C, entries 0/1
  std::vector<std::uint32_t> ids;     // unique item identifiers (row index by default)

  std::size_t size() const { return labels.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return labels.empty() ? 0 : static_cast<int>(labels[0].size()); }

  /// Checks row counts, label alphabet, the no-all-zero-rows rule and id
  /// uniqueness. Throws DataError.
  void validate() const;
};

/// 1 iff the two label vectors share at least one positive class.
int pairwise_similarity(const LabelVector& a, const LabelVector& b);

/// |A| x |B| 0/1 matrix of pairwise similarities. Rejects empty inputs and
/// all-zero label rows.
Matrix batch_similarity(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b);

/// Synthetic multi-label data: one Gaussian prototype per class, items get a
/// primary class plus each extra class independently with multi_label_prob;
/// features are the mean of member-class prototypes plus Gaussian noise.
/// Deterministic for a fixed seed.
MultiLabelDataset generate_synthetic(int n_per_class, int num_classes, int feature_dim,
                                     double multi_label_prob, double noise_sigma,
                                     std::uint64_t seed);

/// Writes <dir>/features.csv and <dir>/labels.csv; full-precision round trip.
void save_dataset(const MultiLabelDataset& ds, const std::filesystem::path& dir);

/// Loads a dataset from two CSV files. A header row is auto-detected.
/// Malformed cells, labels outside {0,1}, row-count mismatches and all-zero
/// label rows are distinct errors naming the offending row/column.
MultiLabelDataset load_dataset(const std::filesystem::path& features_path,
                               const std::filesystem::path& labels_path);

struct SplitSpec {
  std::vector<std::uint32_t> query;
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> database;
};

struct SplitParams {
  int per_class_query = 0;
  int per_class_train = 0;
  bool query_in_database = false;  // retrieval protocols exclude queries from the database
  std::uint64_t seed = 1;
};

/// Per-class sampling without replacement: each class draws per_class_query
/// query items and per_class_train training items among those annotated with
/// it; an item is picked at most once per role. Training items stay inside
/// the database; queries are excluded unless query_in_database is set.
/// Deterministic per seed. Throws DataError when a class has too few items.
SplitSpec make_split(const MultiLabelDataset& ds, const SplitParams& params);

std::vector<LabelVector> gather_labels(const MultiLabelDataset& ds,
                                       std::span<const std::uint32_t> indices);
Matrix gather_features(const MultiLabelDataset& ds, std::span<const std::uint32_t> indices);

/// 0/1 label bits widened to doubles (network inputs and targets).
RealVector label_to_reals(const LabelVector& label);

}  // namespace asymhash
