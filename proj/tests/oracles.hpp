#pragma once

// Deliberately naive reference evaluators for the loss formulas, written
// against plain std types with their own cosine and long-double sums. These
// stay frozen; if the fast implementations drift from them a test must fail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using VecList = std::vector<Vec>;
using Labels = std::vector<std::vector<std::uint8_t>>;

inline long double naive_cos(const Vec& a, const Vec& b) {
  long double ip = 0.0L, na = 0.0L, nb = 0.0L;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ip += static_cast<long double>(a[k]) * b[k];
    na += static_cast<long double>(a[k]) * a[k];
    nb += static_cast<long double>(b[k]) * b[k];
  }
  return ip / (std::sqrt(na) * std::sqrt(nb));
}

inline int naive_similar(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] && b[k]) return 1;
  }
  return 0;
}

// Full-grid margin hinge: 0.5*[S*max(M-cos,0) + (1-S)*max(M+cos,0)].
inline long double naive_hinge_sum(const VecList& g1, const VecList& g2,
                                   const std::vector<std::vector<int>>& similar,
                                   const std::vector<std::vector<double>>& margins) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    for (std::size_t j = 0; j < g2.size(); ++j) {
      const long double c = naive_cos(g1[i], g2[j]);
      const long double m = margins[i][j];
      if (similar[i][j]) {
        if (m - c > 0.0L) sum += 0.5L * (m - c);
      } else {
        if (m + c > 0.0L) sum += 0.5L * (m + c);
      }
    }
  }
  return sum;
}

inline long double naive_sq_dist(const VecList& a, const VecList& b) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const long double r = static_cast<long double>(a[i][k]) - b[i][k];
      sum += r * r;
    }
  }
  return sum;
}

inline long double naive_quantization(const VecList& h) {
  long double sum = 0.0L;
  for (const Vec& row : h) {
    for (double v : row) {
      const long double s = v < 0.0 ? -1.0L : 1.0L;
      sum += (v - s) * (v - s);
    }
  }
  return sum;
}

struct NaiveJLab {
  long double j1, j2, j3, j4, total;
};

inline NaiveJLab naive_j_lab(const VecList& f, const VecList& h, const VecList& lhat,
                             const Labels& labels, double alpha, double lambda, double eta,
                             double beta, double margin) {
  const std::size_t n = labels.size();
  std::vector<std::vector<int>> similar(n, std::vector<int>(n));
  std::vector<std::vector<double>> margins(n, std::vector<double>(n, margin));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) similar[i][j] = naive_similar(labels[i], labels[j]);
  }
  VecList targets;
  for (const auto& label : labels) {
    Vec t(label.size());
    for (std::size_t k = 0; k < label.size(); ++k) t[k] = label[k];
    targets.push_back(t);
  }
  NaiveJLab out{};
  out.j1 = naive_hinge_sum(f, f, similar, margins);
  out.j2 = naive_hinge_sum(h, h, similar, margins);
  out.j3 = naive_sq_dist(lhat, targets);
  out.j4 = naive_quantization(h);
  out.total = alpha * out.j1 + lambda * out.j2 + eta * out.j3 + beta * out.j4;
  return out;
}

struct NaiveJImg {
  long double ff, hh, fq, hu, cls, qnt, total;
};

// Full-variant reference for the stage-2 objective. fixed_margin < 0 means
// scalable margins from the dictionary code cosines; include_asym false
// drops the two dictionary terms (the sym variant).
inline NaiveJImg naive_j_img(const VecList& f, const VecList& h, const VecList& lhat,
                             const Labels& labels, const Labels& dict_labels,
                             const VecList& dict_u, const VecList& dict_q, double alpha,
                             double lambda, double gamma, double mu, double eta, double beta,
                             double fixed_margin, bool include_asym) {
  const std::size_t n = labels.size();
  const std::size_t c = dict_labels.size();

  std::vector<std::vector<double>> pair_m(c, std::vector<double>(c));
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      pair_m[i][j] = fixed_margin >= 0.0
                         ? fixed_margin
                         : std::max(0.0, static_cast<double>(naive_cos(dict_u[i], dict_u[j])));
    }
  }
  std::vector<std::size_t> at(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (labels[i] == dict_labels[j]) {
        at[i] = j;
        break;
      }
    }
  }

  std::vector<std::vector<int>> s_batch(n, std::vector<int>(n));
  std::vector<std::vector<double>> m_batch(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s_batch[i][j] = naive_similar(labels[i], labels[j]);
      m_batch[i][j] = pair_m[at[i]][at[j]];
    }
  }

  NaiveJImg out{};
  out.ff = naive_hinge_sum(f, f, s_batch, m_batch);
  out.hh = naive_hinge_sum(h, h, s_batch, m_batch);
  if (include_asym) {
    std::vector<std::vector<int>> s_dict(n, std::vector<int>(c));
    std::vector<std::vector<double>> m_dict(n, std::vector<double>(c));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        s_dict[i][j] = naive_similar(labels[i], dict_labels[j]);
        m_dict[i][j] = pair_m[at[i]][j];
      }
    }
    out.fq = naive_hinge_sum(f, dict_q, s_dict, m_dict);
    out.hu = naive_hinge_sum(h, dict_u, s_dict, m_dict);
  }
  VecList targets;
  for (const auto& label : labels) {
    Vec t(label.size());
    for (std::size_t k = 0; k < label.size(); ++k) t[k] = label[k];
    targets.push_back(t);
  }
  out.cls = naive_sq_dist(lhat, targets);
  out.qnt = naive_quantization(h);
  out.total = alpha * out.ff + lambda * out.hh + gamma * out.fq + mu * out.hu + eta * out.cls +
              beta * out.qnt;
  return out;
}

inline int naive_hamming_bits(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// Ranks database positions by (Hamming distance, item id) with a comparison
// sort, independent of the library's counting sort.
inline std::vector<std::size_t> naive_rank(const std::vector<int>& query,
                                           const std::vector<std::vector<int>>& db_bits,
                                           const std::vector<std::uint32_t>& ids) {
  std::vector<std::size_t> order(db_bits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const int dx = naive_hamming_bits(query, db_bits[x]);
    const int dy = naive_hamming_bits(query, db_bits[y]);
    return dx != dy ? dx < dy : ids[x] < ids[y];
  });
  return order;
}

// relevance holds 0/1 flags in ranking order; cutoff 0 means the whole list.
inline long double naive_ap(const std::vector<int>& relevance, std::size_t cutoff) {
  const std::size_t stop = cutoff == 0 ? relevance.size() : cutoff;
  std::size_t n_rel = 0;
  for (std::size_t i = 0; i < stop; ++i) n_rel += relevance[i] != 0;
  if (n_rel == 0) return 0.0L;
  long double sum = 0.0L;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stop; ++i) {
    if (relevance[i] != 0) {
      ++hits;
      sum += static_cast<long double>(hits) / static_cast<long double>(i + 1);
    }
  }
  return sum / static_cast<long double>(n_rel);
}

struct NaiveMap {
  long double value = 0.0L;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

inline NaiveMap naive_map(const std::vector<std::vector<int>>& query_bits,
                          const Labels& query_labels,
                          const std::vector<std::vector<int>>& db_bits, const Labels& db_labels,
                          const std::vector<std::uint32_t>& db_ids, std::size_t cutoff) {
  NaiveMap out;
  long double sum = 0.0L;
  for (std::size_t q = 0; q < query_bits.size(); ++q) {
    const auto order = naive_rank(query_bits[q], db_bits, db_ids);
    std::vector<int> rel(order.size());
    int any = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      rel[r] = naive_similar(query_labels[q], db_labels[order[r]]);
      any |= rel[r];
    }
    if (!any) {
      ++out.skipped;
      continue;
    }
    sum += naive_ap(rel, cutoff);
    ++out.evaluated;
  }
  if (out.evaluated > 0) out.value = sum / static_cast<long double>(out.evaluated);
  return out;
}

struct NaivePrPoint {
  long double recall = 0.0L;
  long double precision = 0.0L;
};

// Radius sweep r = 0..K. Zero-relevant queries are excluded outright; a
// query that retrieved nothing at radius r contributes recall 0 but no
// precision term; an empty precision pool anchors to 1.
inline std::vector<NaivePrPoint> naive_pr_radius(const std::vector<std::vector<int>>& query_bits,
                                                 const Labels& query_labels,
                                                 const std::vector<std::vector<int>>& db_bits,
                                                 const Labels& db_labels) {
  const int k = query_bits.empty() ? 0 : static_cast<int>(query_bits[0].size());
  std::vector<NaivePrPoint> points;
  for (int r = 0; r <= k; ++r) {
    long double recall_sum = 0.0L;
    long double precision_sum = 0.0L;
    std::size_t evaluable = 0;
    std::size_t retrieved_any = 0;
    for (std::size_t q = 0; q < query_bits.size(); ++q) {
      std::size_t n_rel = 0;
      std::size_t retrieved = 0;
      std::size_t rel_retrieved = 0;
      for (std::size_t x = 0; x < db_bits.size(); ++x) {
        const int rel = naive_similar(query_labels[q], db_labels[x]);
        n_rel += static_cast<std::size_t>(rel);
        if (naive_hamming_bits(query_bits[q], db_bits[x]) <= r) {
          ++retrieved;
          rel_retrieved += static_cast<std::size_t>(rel);
        }
      }
      if (n_rel == 0) continue;
      ++evaluable;
      recall_sum += static_cast<long double>(rel_retrieved) / static_cast<long double>(n_rel);
      if (retrieved > 0) {
        ++retrieved_any;
        precision_sum +=
            static_cast<long double>(rel_retrieved) / static_cast<long double>(retrieved);
      }
    }
    NaivePrPoint p;
    p.recall = evaluable ? recall_sum / static_cast<long double>(evaluable) : 0.0L;
    p.precision = retrieved_any ? precision_sum / static_cast<long double>(retrieved_any) : 1.0L;
    points.push_back(p);
  }
  return points;
}

// Mean precision within the top k results for k = 1..min(max_k, database
// size), over queries that have at least one relevant item.
inline std::vector<long double> naive_topk(const std::vector<std::vector<int>>& query_bits,
                                           const Labels& query_labels,
                                           const std::vector<std::vector<int>>& db_bits,
                                           const Labels& db_labels,
                                           const std::vector<std::uint32_t>& db_ids,
                                           std::size_t max_k) {
  const std::size_t grid = std::min(max_k, db_bits.size());
  std::vector<long double> precisions(grid, 0.0L);
  std::size_t evaluable = 0;
  for (std::size_t q = 0; q < query_bits.size(); ++q) {
    const auto order = naive_rank(query_bits[q], db_bits, db_ids);
    std::vector<int> rel(order.size());
    int any = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      rel[r] = naive_similar(query_labels[q], db_labels[order[r]]);
      any |= rel[r];
    }
    if (!any) continue;
    ++evaluable;
    std::size_t hits = 0;
    for (std::size_t kk = 0; kk < grid; ++kk) {
      hits += static_cast<std::size_t>(rel[kk]);
      precisions[kk] += static_cast<long double>(hits) / static_cast<long double>(kk + 1);
    }
  }
  for (auto& p : precisions) p = evaluable ? p / static_cast<long double>(evaluable) : 0.0L;
  return precisions;
}

inline long double naive_log_map(const VecList& h,
                                 const std::vector<std::vector<int>>& similar) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) {
      long double theta = 0.0L;
      for (std::size_t k = 0; k < h[i].size(); ++k) {
        theta += 0.5L * static_cast<long double>(h[i][k]) * h[j][k];
      }
      sum += static_cast<long double>(similar[i][j]) * theta - std::log(1.0L + std::exp(theta));
    }
  }
  return -sum;
}

}  // namespace oracle
