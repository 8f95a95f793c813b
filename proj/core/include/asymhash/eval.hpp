#pragma once

// Hamming-space retrieval: encode items to packed binary codes, rank a
// database per query, and score the ranking with MAP, precision-recall
// curves, and top-k precision.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asymhash/dataset.hpp"
#include "asymhash/linalg.hpp"
#include "asymhash/mlp.hpp"

namespace asymhash {

/// Immutable code collection with the labels used as relevance ground truth.
/// Positions are kept in the caller's order; ranking breaks distance ties by
/// ascending item id regardless of that order.
struct CodeDatabase {
  int code_bits = 0;
  std::vector<BinaryCode> codes;
  std::vector<std::uint32_t> ids;
  std::vector<LabelVector> labels;

  std::size_t size() const { return codes.size(); }

  /// Positions sorted by ascending id, filled by make_database. Ranking
  /// walks this order so counting-sort buckets come out id-sorted.
  std::vector<std::size_t> by_id;
};

/// Validates uniform code length, unique ids, matching row counts and the
/// label alphabet, then caches the id-sorted position order.
CodeDatabase make_database(std::vector<BinaryCode> codes, std::vector<std::uint32_t> ids,
                           std::vector<LabelVector> labels);

/// sign() of the hash head for every row. Throws DimensionError if the
/// feature width does not match the network input.
std::vector<BinaryCode> encode_codes(const MlpNetwork& net, const Matrix& features);

/// Encodes the selected dataset rows and carries their ids and labels over.
CodeDatabase encode(const MlpNetwork& net, const MultiLabelDataset& ds,
                    std::span<const std::uint32_t> indices);

/// Database ids ordered by (Hamming distance to query asc, id asc).
/// Counting sort over distances 0..K. Throws DimensionError on K mismatch,
/// DataError on an empty database.
std::vector<std::uint32_t> rank(const BinaryCode& query, const CodeDatabase& db);

/// Marks cutoff = no cutoff (score the whole ranking).
inline constexpr std::size_t kCutoffAll = 0;

/// AP over the top `cutoff` entries of one ranking; `relevance` holds 0/1
/// flags in ranking order. The normalizer is the number of relevant items
/// inside the cutoff, so a perfect ranking scores 1 at any cutoff >= n_rel.
/// Zero relevant items inside the cutoff scores 0. Throws DataError on an
/// empty ranking, ConfigError if cutoff exceeds the ranking length.
double average_precision(std::span<const int> relevance, std::size_t cutoff = kCutoffAll);

struct MeanApResult {
  double value = 0.0;
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;  // queries with no relevant database item
};

/// Mean AP over queries that have at least one relevant database item.
/// Throws DataError when no query is evaluable.
MeanApResult mean_ap(const CodeDatabase& queries, const CodeDatabase& db,
                     std::size_t cutoff = kCutoffAll);

enum class PrSweep {
  radius,  // one point per Hamming radius r in 0..K
  rank,    // one point per ranking depth n in 1..database size
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  bool operator==(const PrPoint&) const = default;
};

/// Precision-recall points averaged over evaluable queries, ordered so
/// recall never decreases. Radius sweep: a query that retrieves nothing at
/// radius r is left out of that point's precision average; if no query
/// retrieves anything the point anchors at precision 1.
std::vector<PrPoint> pr_curve(const CodeDatabase& queries, const CodeDatabase& db,
                              PrSweep sweep = PrSweep::radius);

struct TopKPoint {
  std::size_t k = 0;
  double precision = 0.0;

  bool operator==(const TopKPoint&) const = default;
};

/// Mean precision within the top k for every k in 1..min(max_k, db size).
std::vector<TopKPoint> topk_precision(const CodeDatabase& queries, const CodeDatabase& db,
                                      std::size_t max_k = 1000);

/// Everything the metric files need from one evaluation pass.
struct RetrievalRun {
  std::size_t cutoff = kCutoffAll;
  int code_bits = 0;
  double map = 0.0;
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;
  std::size_t database_size = 0;
  std::vector<PrPoint> pr;
  std::vector<TopKPoint> topk;
};

/// One pass over the queries computing MAP, the PR curve, and top-k
/// precision from shared per-query distance counts.
RetrievalRun evaluate(const CodeDatabase& queries, const CodeDatabase& db,
                      std::size_t cutoff = kCutoffAll, PrSweep sweep = PrSweep::radius,
                      std::size_t max_k = 1000);

/// Mean relevant fraction of the database over evaluable queries: the
/// expected precision of a uniformly random ranking.
double random_ranking_baseline(const CodeDatabase& queries, const CodeDatabase& db);

/// CSV writers, one row per curve point. Headers: "recall,precision" and
/// "k,precision".
void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points);
void write_topk_csv(const std::filesystem::path& path, std::span<const TopKPoint> points);

/// JSON summary of a run: MAP, query counts, cutoff, code bits, plus the
/// caller's key/value echo (config provenance).
void write_map_summary(const std::filesystem::path& path, const RetrievalRun& run,
                       std::span<const std::pair<std::string, std::string>> echo);

}  // namespace asymhash
