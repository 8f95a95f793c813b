#include "asymhash/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "pairwise.hpp"
#include "text_io.hpp"

namespace asymhash {

void SemanticNetConfig::validate() const {
  net.validate();
  if (alpha < 0.0 || lambda < 0.0 || eta < 0.0 || beta < 0.0) {
    throw ConfigError("semantic config: loss weights must be >= 0");
  }
  if (margin < 0.0 || margin > 1.0) {
    throw ConfigError("semantic config: margin must lie in [0,1]");
  }
  if (epochs < 0) throw ConfigError("semantic config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("semantic config: batch_size must be >= 1");
  if (lr_decay_every < 0 || lr_decay_factor <= 0.0) {
    throw ConfigError("semantic config: bad learning-rate decay");
  }
  if (net.trunk_sizes.front() != net.num_classes) {
    throw ConfigError("semantic config: self-supervised net must read its own label width");
  }
}

void JLabComponents::accumulate(const JLabComponents& other) {
  j1 += other.j1;
  j2 += other.j2;
  j3 += other.j3;
  j4 += other.j4;
  total += other.total;
}

void BatchGrads::reset(std::size_t batch, std::size_t feature_dim, std::size_t code_bits,
                       std::size_t num_classes) {
  d_feature.assign(batch, RealVector(feature_dim, 0.0));
  d_hash.assign(batch, RealVector(code_bits, 0.0));
  d_logits.assign(batch, RealVector(num_classes, 0.0));
}

namespace {

Matrix constant_grid(std::size_t rows, std::size_t cols, double value) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = value;
  }
  return m;
}

std::vector<RealVector> collect_features(const std::vector<ForwardRecord>& records) {
  std::vector<RealVector> out;
  out.reserve(records.size());
  for (const ForwardRecord& r : records) out.push_back(r.feature());
  return out;
}

std::vector<RealVector> collect_hashes(const std::vector<ForwardRecord>& records) {
  std::vector<RealVector> out;
  out.reserve(records.size());
  for (const ForwardRecord& r : records) out.push_back(r.hash);
  return out;
}

std::vector<RealVector> collect_logits(const std::vector<ForwardRecord>& records) {
  std::vector<RealVector> out;
  out.reserve(records.size());
  for (const ForwardRecord& r : records) out.push_back(r.logits);
  return out;
}

}  // namespace

JLabComponents j_lab_loss(const std::vector<ForwardRecord>& records,
                          const std::vector<LabelVector>& labels, const SemanticNetConfig& cfg,
                          BatchGrads* grads, BranchHash* signature) {
  if (records.empty()) throw DataError("j_lab_loss: empty batch");
  if (records.size() != labels.size()) {
    throw DimensionError("j_lab_loss: " + std::to_string(records.size()) + " records vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = records.size();
  if (grads) {
    grads->reset(n, records[0].feature().size(), records[0].hash.size(),
                 records[0].logits.size());
  }

  const Matrix similar = batch_similarity(labels, labels);
  const Matrix margins = constant_grid(n, n, cfg.margin);
  const std::vector<RealVector> features = collect_features(records);
  const std::vector<RealVector> hashes = collect_hashes(records);
  const std::vector<RealVector> logits = collect_logits(records);

  JLabComponents out;
  out.j1 = detail::margin_hinge_grid(features, features, similar, margins, cfg.alpha, "J1",
                                     grads ? &grads->d_feature : nullptr,
                                     grads ? &grads->d_feature : nullptr, signature);
  out.j2 = detail::margin_hinge_grid(hashes, hashes, similar, margins, cfg.lambda, "J2",
                                     grads ? &grads->d_hash : nullptr,
                                     grads ? &grads->d_hash : nullptr, signature);
  out.j3 = detail::classification_term(logits, labels, cfg.eta,
                                       grads ? &grads->d_logits : nullptr);
  out.j4 = detail::quantization_term(hashes, cfg.beta, grads ? &grads->d_hash : nullptr,
                                     signature);
  out.total = cfg.alpha * out.j1 + cfg.lambda * out.j2 + cfg.eta * out.j3 + cfg.beta * out.j4;
  return out;
}

SemanticTrainResult train_semantic(const std::vector<LabelVector>& labels,
                                   const SemanticNetConfig& cfg) {
  cfg.validate();
  if (labels.empty()) throw DataError("train_semantic: no training labels");
  if (labels[0].size() != cfg.net.num_classes) {
    throw ConfigError("train_semantic: labels have " + std::to_string(labels[0].size()) +
                      " classes, net expects " + std::to_string(cfg.net.num_classes));
  }

  SemanticTrainResult result{MlpNetwork(cfg.net, cfg.seed), {}};
  MlpNetwork& net = result.net;

  std::mt19937_64 shuffle_rng(cfg.seed + 1);
  AdamState opt;
  AdamParams hp = cfg.adam;
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> flat(net.param_count());
  BatchGrads bg;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.lr_decay_every > 0 && epoch % cfg.lr_decay_every == 0) {
      hp.lr *= cfg.lr_decay_factor;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    JLabComponents epoch_sum;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<LabelVector> batch;
      std::vector<ForwardRecord> records;
      batch.reserve(stop - start);
      records.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(labels[order[k]]);
        records.push_back(net.forward(label_to_reals(batch.back())));
      }

      const JLabComponents comps = j_lab_loss(records, batch, cfg, &bg, nullptr);
      if (!std::isfinite(comps.total)) {
        throw NumericError("semantic training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch starting at item " +
                           std::to_string(start));
      }
      std::fill(flat.begin(), flat.end(), 0.0);
      for (std::size_t i = 0; i < records.size(); ++i) {
        net.backward(records[i], bg.d_feature[i], bg.d_hash[i], bg.d_logits[i], flat);
      }
      adam_step(net.parameters(), flat, opt, hp);
      epoch_sum.accumulate(comps);
    }
    result.trace.push_back(epoch_sum);
  }
  return result;
}

// ---- dictionary ----

std::size_t LabelVectorHash::operator()(const LabelVector& label) const {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : label) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

std::size_t SemanticDictionary::add(DictEntry entry) {
  auto it = index_.find(entry.label);
  if (it != index_.end()) return it->second;
  const std::size_t idx = entries_.size();
  index_.emplace(entry.label, idx);
  entries_.push_back(std::move(entry));
  return idx;
}

const DictEntry* SemanticDictionary::find(const LabelVector& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const DictEntry& SemanticDictionary::find_or_throw(const LabelVector& label) const {
  const DictEntry* entry = find(label);
  if (!entry) {
    std::string bits;
    for (std::uint8_t b : label) bits += b ? '1' : '0';
    throw LookupError("dictionary has no entry for label " + bits);
  }
  return *entry;
}

std::size_t SemanticDictionary::index_of(const LabelVector& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) {
    find_or_throw(label);  // throws with the formatted label
  }
  return it->second;
}

const DictEntry& SemanticDictionary::nearest_by_label(const LabelVector& label) const {
  if (entries_.empty()) throw LookupError("dictionary is empty");
  std::size_t best = 0;
  int best_dist = -1;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const LabelVector& key = entries_[i].label;
    if (key.size() != label.size()) {
      throw DimensionError("nearest_by_label: label width does not match dictionary");
    }
    int d = 0;
    for (std::size_t k = 0; k < key.size(); ++k) d += key[k] != label[k];
    if (best_dist < 0 || d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return entries_[best];
}

SemanticDictionary build_dictionaries(const MlpNetwork& net,
                                      const std::vector<LabelVector>& labels) {
  if (labels.empty()) throw DataError("build_dictionaries: no labels");
  if (labels[0].size() != net.input_dim()) {
    throw ConfigError("build_dictionaries: label width " + std::to_string(labels[0].size()) +
                      " does not match net input " + std::to_string(net.input_dim()));
  }
  SemanticDictionary dict;
  for (const LabelVector& label : labels) {
    if (dict.find(label)) continue;
    ForwardRecord record = net.forward(label_to_reals(label));
    DictEntry entry;
    entry.label = label;
    entry.code = sign_binarize(record.hash);
    entry.feature = record.feature();
    dict.add(std::move(entry));
  }
  return dict;
}

void save_dictionary(const SemanticDictionary& dict, const std::filesystem::path& path) {
  if (dict.size() == 0) throw DataError("save_dictionary: empty dictionary");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dictionary " + path.string());
  const DictEntry& first = dict.entry(0);
  for (std::size_t i = 0; i < first.label.size(); ++i) out << (i ? "," : "") << "l" << i;
  for (int i = 0; i < first.code.length(); ++i) out << ",u" << i;
  for (std::size_t i = 0; i < first.feature.size(); ++i) out << ",q" << i;
  out << "\n";
  for (const DictEntry& entry : dict.entries()) {
    for (std::size_t i = 0; i < entry.label.size(); ++i) {
      out << (i ? "," : "") << static_cast<int>(entry.label[i]);
    }
    for (int i = 0; i < entry.code.length(); ++i) out << "," << entry.code.bit(i);
    for (double q : entry.feature) out << "," << detail::format_double(q);
    out << "\n";
  }
}

SemanticDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dictionary " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dictionary " + path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  // The header spells out the column split: l* labels, u* code bits, q* features.
  std::size_t n_label = 0, n_code = 0, n_feature = 0;
  for (const std::string& name : detail::split_csv(line)) {
    if (name.rfind("l", 0) == 0 && n_code == 0 && n_feature == 0) {
      ++n_label;
    } else if (name.rfind("u", 0) == 0 && n_feature == 0) {
      ++n_code;
    } else if (name.rfind("q", 0) == 0) {
      ++n_feature;
    } else {
      throw ParseError("dictionary " + path.string() + ": unrecognized column '" + name + "'");
    }
  }
  if (n_label == 0 || n_code == 0 || n_feature == 0) {
    throw ParseError("dictionary " + path.string() + ": header must list l*, u*, q* columns");
  }

  SemanticDictionary dict;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != n_label + n_code + n_feature) {
      throw ParseError("dictionary " + path.string() + " row " + std::to_string(row) +
                       ": expected " + std::to_string(n_label + n_code + n_feature) +
                       " columns, got " + std::to_string(cells.size()));
    }
    DictEntry entry;
    entry.label.resize(n_label);
    for (std::size_t i = 0; i < n_label; ++i) {
      double v;
      if (!detail::parse_double(cells[i], v) || (v != 0.0 && v != 1.0)) {
        throw ParseError("dictionary " + path.string() + " row " + std::to_string(row) +
                         ": bad label cell '" + cells[i] + "'");
      }
      entry.label[i] = static_cast<std::uint8_t>(v);
    }
    std::vector<int> bits(n_code);
    for (std::size_t i = 0; i < n_code; ++i) {
      const std::string& cell = cells[n_label + i];
      if (cell == "1") {
        bits[i] = 1;
      } else if (cell == "-1") {
        bits[i] = -1;
      } else {
        throw ParseError("dictionary " + path.string() + " row " + std::to_string(row) +
                         ": code bit must be 1 or -1, got '" + cell + "'");
      }
    }
    entry.code = BinaryCode::from_bits(bits);
    entry.feature.resize(n_feature);
    for (std::size_t i = 0; i < n_feature; ++i) {
      if (!detail::parse_double(cells[n_label + n_code + i], entry.feature[i])) {
        throw ParseError("dictionary " + path.string() + " row " + std::to_string(row) +
                         ": bad feature cell '" + cells[n_label + n_code + i] + "'");
      }
    }
    dict.add(std::move(entry));
    ++row;
  }
  if (dict.size() == 0) throw ParseError("dictionary " + path.string() + ": no entries");
  return dict;
}

LossProbe make_jlab_probe(std::vector<LabelVector> labels, SemanticNetConfig cfg) {
  return [labels = std::move(labels), cfg = std::move(cfg)](const MlpNetwork& net) {
    std::vector<ForwardRecord> records;
    records.reserve(labels.size());
    BranchHash sig;
    for (const LabelVector& label : labels) {
      records.push_back(net.forward(label_to_reals(label)));
      sig.feed_relu_masks(records.back());
    }
    BatchGrads bg;
    const JLabComponents comps = j_lab_loss(records, labels, cfg, &bg, &sig);

    LossSample sample;
    sample.loss = comps.total;
    sample.grads.assign(net.param_count(), 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      net.backward(records[i], bg.d_feature[i], bg.d_hash[i], bg.d_logits[i], sample.grads);
    }
    sample.signature = sig.state;
    return sample;
  };
}

}  // namespace asymhash
