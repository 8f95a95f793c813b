#include "asymhash/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "asymhash/errors.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace asymhash {

namespace {

// Pure map over [0, n): fn(i) writes only to slot i, so scheduling order
// cannot change the result. The first exception wins and is rethrown after
// all workers drain.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers = std::min<std::size_t>(hw == 0 ? 1 : hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Database positions ordered by (distance, id). Counting sort over the
// distances; walking db.by_id keeps every bucket id-sorted.
std::vector<std::size_t> rank_order(const BinaryCode& query, const CodeDatabase& db,
                                    std::vector<int>& dist_scratch) {
  if (db.size() == 0) throw DataError("rank: empty database");
  if (query.length() != db.code_bits) {
    throw DimensionError("rank: query has " + std::to_string(query.length()) +
                         " bits, database has " + std::to_string(db.code_bits));
  }
  const std::size_t radii = static_cast<std::size_t>(db.code_bits) + 1;
  dist_scratch.assign(db.size(), 0);
  std::vector<std::size_t> bucket_start(radii + 1, 0);
  for (std::size_t pos = 0; pos < db.size(); ++pos) {
    const int d = hamming_distance(query, db.codes[pos]);
    dist_scratch[pos] = d;
    ++bucket_start[static_cast<std::size_t>(d) + 1];
  }
  for (std::size_t r = 1; r <= radii; ++r) bucket_start[r] += bucket_start[r - 1];
  std::vector<std::size_t> order(db.size());
  for (std::size_t pos : db.by_id) {
    order[bucket_start[static_cast<std::size_t>(dist_scratch[pos])]++] = pos;
  }
  return order;
}

struct QueryWork {
  bool evaluable = false;
  std::size_t n_rel = 0;
  double ap = 0.0;
  std::vector<std::uint8_t> rel;           // relevance flags in rank order
  std::vector<std::size_t> retrieved;      // items within radius r, r in 0..K
  std::vector<std::size_t> rel_retrieved;  // relevant items within radius r
};

void check_pair(const CodeDatabase& queries, const CodeDatabase& db) {
  if (queries.size() == 0) throw DataError("evaluate: no queries");
  if (db.size() == 0) throw DataError("evaluate: empty database");
  if (queries.code_bits != db.code_bits) {
    throw DimensionError("evaluate: query codes have " + std::to_string(queries.code_bits) +
                         " bits, database codes have " + std::to_string(db.code_bits));
  }
  if (queries.labels[0].size() != db.labels[0].size()) {
    throw DimensionError("evaluate: query labels have " +
                         std::to_string(queries.labels[0].size()) + " classes, database has " +
                         std::to_string(db.labels[0].size()));
  }
}

}  // namespace

CodeDatabase make_database(std::vector<BinaryCode> codes, std::vector<std::uint32_t> ids,
                           std::vector<LabelVector> labels) {
  if (codes.empty()) throw DataError("database: no codes");
  if (ids.size() != codes.size() || labels.size() != codes.size()) {
    throw DataError("database: " + std::to_string(codes.size()) + " codes, " +
                    std::to_string(ids.size()) + " ids, " + std::to_string(labels.size()) +
                    " label rows");
  }
  CodeDatabase db;
  db.code_bits = codes[0].length();
  if (db.code_bits < 1) throw DataError("database: zero-length codes");
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].length() != db.code_bits) {
      throw DimensionError("database: code " + std::to_string(i) + " has " +
                           std::to_string(codes[i].length()) + " bits, expected " +
                           std::to_string(db.code_bits));
    }
    if (labels[i].size() != labels[0].size()) {
      throw DataError("database: label row " + std::to_string(i) + " has " +
                      std::to_string(labels[i].size()) + " classes, expected " +
                      std::to_string(labels[0].size()));
    }
    for (std::uint8_t v : labels[i]) {
      if (v > 1) throw DataError("database: label entries must be 0 or 1");
    }
  }
  std::unordered_set<std::uint32_t> seen;
  for (std::uint32_t id : ids) {
    if (!seen.insert(id).second) {
      throw DataError("database: duplicate item id " + std::to_string(id));
    }
  }
  db.codes = std::move(codes);
  db.ids = std::move(ids);
  db.labels = std::move(labels);
  db.by_id.resize(db.size());
  std::iota(db.by_id.begin(), db.by_id.end(), std::size_t{0});
  std::sort(db.by_id.begin(), db.by_id.end(),
            [&](std::size_t a, std::size_t b) { return db.ids[a] < db.ids[b]; });
  return db;
}

std::vector<BinaryCode> encode_codes(const MlpNetwork& net, const Matrix& features) {
  std::vector<BinaryCode> codes;
  codes.reserve(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const ForwardRecord record = net.forward(features.row(r));
    codes.push_back(sign_binarize(record.hash));
  }
  return codes;
}

CodeDatabase encode(const MlpNetwork& net, const MultiLabelDataset& ds,
                    std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw DataError("encode: no items selected");
  std::vector<std::uint32_t> ids;
  std::vector<LabelVector> labels;
  ids.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::uint32_t idx : indices) {
    if (idx >= ds.size()) {
      throw DataError("encode: index " + std::to_string(idx) + " out of range for " +
                      std::to_string(ds.size()) + " items");
    }
    ids.push_back(ds.ids[idx]);
    labels.push_back(ds.labels[idx]);
  }
  return make_database(encode_codes(net, gather_features(ds, indices)), std::move(ids),
                       std::move(labels));
}

std::vector<std::uint32_t> rank(const BinaryCode& query, const CodeDatabase& db) {
  std::vector<int> scratch;
  const std::vector<std::size_t> order = rank_order(query, db, scratch);
  std::vector<std::uint32_t> out;
  out.reserve(order.size());
  for (std::size_t pos : order) out.push_back(db.ids[pos]);
  return out;
}

double average_precision(std::span<const int> relevance, std::size_t cutoff) {
  if (relevance.empty()) throw DataError("average_precision: empty ranking");
  if (cutoff > relevance.size()) {
    throw ConfigError("average_precision: cutoff " + std::to_string(cutoff) + " exceeds the " +
                      std::to_string(relevance.size()) + "-item ranking");
  }
  const std::size_t stop = cutoff == kCutoffAll ? relevance.size() : cutoff;
  std::size_t n_rel = 0;
  for (std::size_t i = 0; i < stop; ++i) n_rel += relevance[i] != 0;
  if (n_rel == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stop; ++i) {
    if (relevance[i] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(n_rel);
}

RetrievalRun evaluate(const CodeDatabase& queries, const CodeDatabase& db, std::size_t cutoff,
                      PrSweep sweep, std::size_t max_k) {
  check_pair(queries, db);
  if (cutoff > db.size()) {
    throw ConfigError("evaluate: cutoff " + std::to_string(cutoff) + " exceeds the " +
                      std::to_string(db.size()) + "-item database");
  }
  if (max_k == 0) throw ConfigError("evaluate: max_k must be >= 1");

  const std::size_t n = db.size();
  const std::size_t radii = static_cast<std::size_t>(db.code_bits) + 1;
  std::vector<QueryWork> work(queries.size());

  parallel_for(queries.size(), [&](std::size_t q) {
    QueryWork& w = work[q];
    std::vector<int> dist;
    const std::vector<std::size_t> order = rank_order(queries.codes[q], db, dist);
    w.rel.resize(n);
    std::vector<std::size_t> per_radius(radii, 0), rel_per_radius(radii, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t pos = order[r];
      const int flag = pairwise_similarity(queries.labels[q], db.labels[pos]);
      w.rel[r] = static_cast<std::uint8_t>(flag);
      w.n_rel += static_cast<std::size_t>(flag);
      ++per_radius[static_cast<std::size_t>(dist[pos])];
      rel_per_radius[static_cast<std::size_t>(dist[pos])] += static_cast<std::size_t>(flag);
    }
    w.evaluable = w.n_rel > 0;
    if (!w.evaluable) return;
    w.retrieved.assign(radii, 0);
    w.rel_retrieved.assign(radii, 0);
    std::size_t run_all = 0, run_rel = 0;
    for (std::size_t r = 0; r < radii; ++r) {
      run_all += per_radius[r];
      run_rel += rel_per_radius[r];
      w.retrieved[r] = run_all;
      w.rel_retrieved[r] = run_rel;
    }
    const std::size_t stop = cutoff == kCutoffAll ? n : cutoff;
    std::size_t hits = 0, in_scope = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < stop; ++i) in_scope += w.rel[i];
    if (in_scope > 0) {
      for (std::size_t i = 0; i < stop; ++i) {
        if (w.rel[i]) {
          ++hits;
          sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
      }
      w.ap = sum / static_cast<double>(in_scope);
    }
  });

  RetrievalRun run;
  run.cutoff = cutoff;
  run.code_bits = db.code_bits;
  run.database_size = n;
  double ap_sum = 0.0;
  for (const QueryWork& w : work) {
    if (!w.evaluable) {
      ++run.skipped_queries;
      continue;
    }
    ++run.evaluated_queries;
    ap_sum += w.ap;
  }
  if (run.evaluated_queries == 0) {
    throw DataError("evaluate: no query has a relevant database item");
  }
  run.map = ap_sum / static_cast<double>(run.evaluated_queries);

  if (sweep == PrSweep::radius) {
    run.pr.resize(radii);
    std::vector<double> prec_sum(radii, 0.0), recall_sum(radii, 0.0);
    std::vector<std::size_t> prec_count(radii, 0);
    for (const QueryWork& w : work) {
      if (!w.evaluable) continue;
      for (std::size_t r = 0; r < radii; ++r) {
        recall_sum[r] += static_cast<double>(w.rel_retrieved[r]) / static_cast<double>(w.n_rel);
        if (w.retrieved[r] > 0) {
          prec_sum[r] +=
              static_cast<double>(w.rel_retrieved[r]) / static_cast<double>(w.retrieved[r]);
          ++prec_count[r];
        }
      }
    }
    for (std::size_t r = 0; r < radii; ++r) {
      run.pr[r].recall = recall_sum[r] / static_cast<double>(run.evaluated_queries);
      // No query retrieved anything yet: the conventional precision anchor.
      run.pr[r].precision =
          prec_count[r] > 0 ? prec_sum[r] / static_cast<double>(prec_count[r]) : 1.0;
    }
  } else {
    run.pr.resize(n);
    std::vector<std::size_t> cum_rel_sum(n, 0);
    std::vector<double> recall_sum(n, 0.0);
    for (const QueryWork& w : work) {
      if (!w.evaluable) continue;
      std::size_t cum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += w.rel[i];
        cum_rel_sum[i] += cum;
        recall_sum[i] += static_cast<double>(cum) / static_cast<double>(w.n_rel);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      run.pr[i].recall = recall_sum[i] / static_cast<double>(run.evaluated_queries);
      run.pr[i].precision = static_cast<double>(cum_rel_sum[i]) /
                            (static_cast<double>(i + 1) * static_cast<double>(run.evaluated_queries));
    }
  }

  const std::size_t k_top = std::min(max_k, n);
  run.topk.resize(k_top);
  std::vector<std::size_t> top_rel_sum(k_top, 0);
  for (const QueryWork& w : work) {
    if (!w.evaluable) continue;
    std::size_t cum = 0;
    for (std::size_t i = 0; i < k_top; ++i) {
      cum += w.rel[i];
      top_rel_sum[i] += cum;
    }
  }
  for (std::size_t i = 0; i < k_top; ++i) {
    run.topk[i].k = i + 1;
    run.topk[i].precision = static_cast<double>(top_rel_sum[i]) /
                            (static_cast<double>(i + 1) * static_cast<double>(run.evaluated_queries));
  }
  return run;
}

MeanApResult mean_ap(const CodeDatabase& queries, const CodeDatabase& db, std::size_t cutoff) {
  const RetrievalRun run = evaluate(queries, db, cutoff, PrSweep::radius, 1);
  return {run.map, run.evaluated_queries, run.skipped_queries};
}

std::vector<PrPoint> pr_curve(const CodeDatabase& queries, const CodeDatabase& db, PrSweep sweep) {
  return evaluate(queries, db, kCutoffAll, sweep, 1).pr;
}

std::vector<TopKPoint> topk_precision(const CodeDatabase& queries, const CodeDatabase& db,
                                      std::size_t max_k) {
  return evaluate(queries, db, kCutoffAll, PrSweep::radius, max_k).topk;
}

double random_ranking_baseline(const CodeDatabase& queries, const CodeDatabase& db) {
  check_pair(queries, db);
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::size_t n_rel = 0;
    for (std::size_t i = 0; i < db.size(); ++i) {
      n_rel += static_cast<std::size_t>(pairwise_similarity(queries.labels[q], db.labels[i]));
    }
    if (n_rel == 0) continue;
    sum += static_cast<double>(n_rel) / static_cast<double>(db.size());
    ++evaluated;
  }
  if (evaluated == 0) throw DataError("baseline: no query has a relevant database item");
  return sum / static_cast<double>(evaluated);
}

void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "recall,precision\n";
  for (const PrPoint& p : points) {
    out << detail::format_double(p.recall) << "," << detail::format_double(p.precision) << "\n";
  }
}

void write_topk_csv(const std::filesystem::path& path, std::span<const TopKPoint> points) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "k,precision\n";
  for (const TopKPoint& p : points) {
    out << p.k << "," << detail::format_double(p.precision) << "\n";
  }
}

void write_map_summary(const std::filesystem::path& path, const RetrievalRun& run,
                       std::span<const std::pair<std::string, std::string>> echo) {
  nlohmann::ordered_json summary;
  summary["map"] = run.map;
  summary["cutoff"] = run.cutoff;  // 0 means the whole database
  summary["code_bits"] = run.code_bits;
  summary["evaluated_queries"] = run.evaluated_queries;
  summary["skipped_queries"] = run.skipped_queries;
  summary["database_size"] = run.database_size;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : echo) config[key] = value;
  summary["config"] = config;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << summary.dump(2) << "\n";
}

}  // namespace asymhash
