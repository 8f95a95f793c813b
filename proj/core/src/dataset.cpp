#include "asymhash/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <string>
#include <unordered_set>

#include "text_io.hpp"

namespace asymhash {

void MultiLabelDataset::validate() const {
  const std::size_t m = labels.size();
  if (features.rows() != m) {
    throw DataError("dataset: " + std::to_string(features.rows()) + " feature rows vs " +
                    std::to_string(m) + " label rows");
  }
  if (ids.size() != m) {
    throw DataError("dataset: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(m) + " items");
  }
  if (m == 0) throw DataError("dataset: empty");
  if (features.cols() < 1) throw DataError("dataset: feature dimension must be >= 1");
  const std::size_t c = labels[0].size();
  if (c < 2) throw DataError("dataset: need at least 2 classes");
  std::unordered_set<std::uint32_t> seen;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i].size() != c) {
      throw DataError("dataset: label row " + std::to_string(i) + " has " +
                      std::to_string(labels[i].size()) + " classes, expected " +
                      std::to_string(c));
    }
    bool any = false;
    for (std::size_t k = 0; k < c; ++k) {
      if (labels[i][k] > 1) {
        throw DataError("dataset: label row " + std::to_string(i) + ", column " +
                        std::to_string(k) + " outside {0,1}");
      }
      any = any || labels[i][k] == 1;
    }
    if (!any) throw DataError("dataset: all-zero label row " + std::to_string(i));
    if (!seen.insert(ids[i]).second) {
      throw DataError("dataset: duplicate id " + std::to_string(ids[i]));
    }
  }
}

int pairwise_similarity(const LabelVector& a, const LabelVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("pairwise_similarity: label length mismatch");
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 1 && b[k] == 1) return 1;
  }
  return 0;
}

namespace {

void require_valid_label(const LabelVector& l, const char* side, std::size_t row) {
  bool any = false;
  for (std::uint8_t v : l) {
    if (v > 1) {
      throw DataError(std::string("batch_similarity: ") + side + " label row " +
                      std::to_string(row) + " outside {0,1}");
    }
    any = any || v == 1;
  }
  if (!any) {
    throw DataError(std::string("batch_similarity: ") + side + " label row " +
                    std::to_string(row) + " is all-zero");
  }
}

}  // namespace

Matrix batch_similarity(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b) {
  if (a.empty() || b.empty()) throw DataError("batch_similarity: empty input list");
  for (std::size_t i = 0; i < a.size(); ++i) require_valid_label(a[i], "left", i);
  for (std::size_t j = 0; j < b.size(); ++j) require_valid_label(b[j], "right", j);
  Matrix s(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      s(i, j) = pairwise_similarity(a[i], b[j]);
    }
  }
  return s;
}

MultiLabelDataset generate_synthetic(int n_per_class, int num_classes, int feature_dim,
                                     double multi_label_prob, double noise_sigma,
                                     std::uint64_t seed) {
  if (n_per_class < 1 || num_classes < 2 || feature_dim < 1) {
    throw ConfigError("generate_synthetic: counts must be positive (classes >= 2)");
  }
  if (multi_label_prob < 0.0 || multi_label_prob >= 1.0) {
    throw ConfigError("generate_synthetic: multi_label_prob must be in [0, 1)");
  }
  if (noise_sigma < 0.0) throw ConfigError("generate_synthetic: noise_sigma must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Matrix prototypes(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(feature_dim));
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    for (std::size_t d = 0; d < prototypes.cols(); ++d) prototypes(c, d) = unit_normal(rng);
  }

  const std::size_t m = static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(num_classes);
  MultiLabelDataset ds;
  ds.features = Matrix(m, static_cast<std::size_t>(feature_dim));
  ds.labels.reserve(m);
  ds.ids.reserve(m);

  std::size_t row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      LabelVector label(static_cast<std::size_t>(num_classes), 0);
      label[static_cast<std::size_t>(c)] = 1;
      for (int k = 0; k < num_classes; ++k) {
        if (k != c && multi_label_prob > 0.0 && unif(rng) < multi_label_prob) {
          label[static_cast<std::size_t>(k)] = 1;
        }
      }
      int members = 0;
      auto feat = ds.features.row(row);
      for (int k = 0; k < num_classes; ++k) {
        if (label[static_cast<std::size_t>(k)] == 1) {
          ++members;
          for (int d = 0; d < feature_dim; ++d) {
            feat[static_cast<std::size_t>(d)] += prototypes(static_cast<std::size_t>(k),
                                                            static_cast<std::size_t>(d));
          }
        }
      }
      for (int d = 0; d < feature_dim; ++d) {
        feat[static_cast<std::size_t>(d)] /= members;
        feat[static_cast<std::size_t>(d)] += noise_sigma * unit_normal(rng);
      }
      ds.labels.push_back(std::move(label));
      ds.ids.push_back(static_cast<std::uint32_t>(row));
    }
  }
  ds.validate();
  return ds;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

bool looks_like_header(const std::string& line) {
  for (const std::string& cell : detail::split_csv(line)) {
    double v;
    if (!detail::parse_double(cell, v)) return true;
  }
  return false;
}

}  // namespace

void save_dataset(const MultiLabelDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "features.csv");
    if (!out) throw ParseError("cannot write " + (dir / "features.csv").string());
    for (std::size_t d = 0; d < ds.features.cols(); ++d) {
      out << (d ? "," : "") << "f" << d;
    }
    out << "\n";
    for (std::size_t i = 0; i < ds.features.rows(); ++i) {
      auto row = ds.features.row(i);
      for (std::size_t d = 0; d < row.size(); ++d) {
        out << (d ? "," : "") << detail::format_double(row[d]);
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    if (!out) throw ParseError("cannot write " + (dir / "labels.csv").string());
    const std::size_t c = ds.labels[0].size();
    for (std::size_t k = 0; k < c; ++k) out << (k ? "," : "") << "c" << k;
    out << "\n";
    for (const LabelVector& label : ds.labels) {
      for (std::size_t k = 0; k < label.size(); ++k) {
        out << (k ? "," : "") << static_cast<int>(label[k]);
      }
      out << "\n";
    }
  }
}

MultiLabelDataset load_dataset(const std::filesystem::path& features_path,
                               const std::filesystem::path& labels_path) {
  std::vector<std::string> feat_lines = read_lines(features_path);
  std::vector<std::string> label_lines = read_lines(labels_path);
  if (!feat_lines.empty() && looks_like_header(feat_lines.front())) {
    feat_lines.erase(feat_lines.begin());
  }
  if (!label_lines.empty() && looks_like_header(label_lines.front())) {
    label_lines.erase(label_lines.begin());
  }
  if (feat_lines.size() != label_lines.size()) {
    throw DataError("row-count mismatch: " + std::to_string(feat_lines.size()) +
                    " feature rows vs " + std::to_string(label_lines.size()) + " label rows");
  }
  if (feat_lines.empty()) throw DataError("load_dataset: no data rows");

  MultiLabelDataset ds;
  const std::size_t m = feat_lines.size();
  const std::size_t d_v = detail::split_csv(feat_lines[0]).size();
  ds.features = Matrix(m, d_v);
  for (std::size_t i = 0; i < m; ++i) {
    const auto cells = detail::split_csv(feat_lines[i]);
    if (cells.size() != d_v) {
      throw ParseError(features_path.filename().string() + " row " + std::to_string(i) +
                       ": expected " + std::to_string(d_v) + " columns, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t d = 0; d < d_v; ++d) {
      double v;
      if (!detail::parse_double(cells[d], v)) {
        throw ParseError(features_path.filename().string() + " row " + std::to_string(i) +
                         ", column " + std::to_string(d) + ": cannot parse '" + cells[d] +
                         "' as a real");
      }
      ds.features(i, d) = v;
    }
  }

  const std::size_t c = detail::split_csv(label_lines[0]).size();
  ds.labels.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto cells = detail::split_csv(label_lines[i]);
    if (cells.size() != c) {
      throw ParseError(labels_path.filename().string() + " row " + std::to_string(i) +
                       ": expected " + std::to_string(c) + " columns, got " +
                       std::to_string(cells.size()));
    }
    LabelVector label(c);
    bool any = false;
    for (std::size_t k = 0; k < c; ++k) {
      double v;
      if (!detail::parse_double(cells[k], v)) {
        throw ParseError(labels_path.filename().string() + " row " + std::to_string(i) +
                         ", column " + std::to_string(k) + ": cannot parse '" + cells[k] + "'");
      }
      if (v != 0.0 && v != 1.0) {
        throw ParseError(labels_path.filename().string() + " row " + std::to_string(i) +
                         ", column " + std::to_string(k) + ": label value '" + cells[k] +
                         "' outside {0,1}");
      }
      label[k] = static_cast<std::uint8_t>(v);
      any = any || label[k] == 1;
    }
    if (!any) {
      throw DataError(labels_path.filename().string() + " row " + std::to_string(i) +
                      ": all-zero label row");
    }
    ds.labels.push_back(std::move(label));
  }
  ds.ids.resize(m);
  for (std::size_t i = 0; i < m; ++i) ds.ids[i] = static_cast<std::uint32_t>(i);
  ds.validate();
  return ds;
}

SplitSpec make_split(const MultiLabelDataset& ds, const SplitParams& params) {
  if (params.per_class_query < 0 || params.per_class_train < 0) {
    throw ConfigError("make_split: per-class counts must be >= 0");
  }
  ds.validate();
  const int c = ds.num_classes();
  std::mt19937_64 rng(params.seed);

  std::vector<char> in_query(ds.size(), 0);
  std::vector<char> in_train(ds.size(), 0);
  SplitSpec split;

  auto draw_per_class = [&](int want, std::vector<char>& taken, const std::vector<char>& excluded,
                            std::vector<std::uint32_t>& out, const char* role) {
    for (int cls = 0; cls < c; ++cls) {
      std::vector<std::uint32_t> candidates;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i][static_cast<std::size_t>(cls)] == 1 && !taken[i] && !excluded[i]) {
          candidates.push_back(static_cast<std::uint32_t>(i));
        }
      }
      if (static_cast<int>(candidates.size()) < want) {
        throw DataError("make_split: class " + std::to_string(cls) + " has " +
                        std::to_string(candidates.size()) + " items available for " + role +
                        ", need " + std::to_string(want));
      }
      std::shuffle(candidates.begin(), candidates.end(), rng);
      for (int k = 0; k < want; ++k) {
        taken[candidates[static_cast<std::size_t>(k)]] = 1;
        out.push_back(candidates[static_cast<std::size_t>(k)]);
      }
    }
  };

  std::vector<char> none(ds.size(), 0);
  draw_per_class(params.per_class_query, in_query, none, split.query, "query");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (params.query_in_database || !in_query[i]) {
      split.database.push_back(static_cast<std::uint32_t>(i));
    }
  }
  // train is sampled inside the database
  draw_per_class(params.per_class_train, in_train, in_query, split.train, "train");

  std::sort(split.query.begin(), split.query.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.database.begin(), split.database.end());
  return split;
}

std::vector<LabelVector> gather_labels(const MultiLabelDataset& ds,
                                       std::span<const std::uint32_t> indices) {
  std::vector<LabelVector> out;
  out.reserve(indices.size());
  for (std::uint32_t i : indices) out.push_back(ds.labels[i]);
  return out;
}

Matrix gather_features(const MultiLabelDataset& ds, std::span<const std::uint32_t> indices) {
  Matrix out(indices.size(), ds.features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = ds.features.row(indices[r]);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

RealVector label_to_reals(const LabelVector& label) {
  RealVector out(label.size());
  for (std::size_t i = 0; i < label.size(); ++i) out[i] = label[i];
  return out;
}

}  // namespace asymhash
