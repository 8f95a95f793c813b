#include "asymhash/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pairwise.hpp"

namespace asymhash {

const char* to_string(ImageVariant v) {
  switch (v) {
    case ImageVariant::full: return "full";
    case ImageVariant::sym: return "sym";
    case ImageVariant::mars: return "mars";
    case ImageVariant::cos: return "cos";
  }
  return "?";
}

ImageVariant image_variant_from_string(const std::string& name) {
  if (name == "full") return ImageVariant::full;
  if (name == "sym") return ImageVariant::sym;
  if (name == "mars") return ImageVariant::mars;
  if (name == "cos") return ImageVariant::cos;
  throw ConfigError("unknown variant '" + name + "' (want full, sym, mars, or cos)");
}

void ImageNetConfig::validate() const {
  net.validate();
  if (alpha < 0.0 || lambda < 0.0 || gamma < 0.0 || mu < 0.0 || eta < 0.0 || beta < 0.0) {
    throw ConfigError("image config: loss weights must be >= 0");
  }
  if (mars_margin < 0.0 || mars_margin > 1.0) {
    throw ConfigError("image config: mars margin must lie in [0,1]");
  }
  if (epochs < 0) throw ConfigError("image config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("image config: batch_size must be >= 1");
  if (lr_decay_every < 0 || lr_decay_factor <= 0.0) {
    throw ConfigError("image config: bad learning-rate decay");
  }
}

double scalable_margin(const BinaryCode& u_a, const BinaryCode& u_b) {
  return std::max(0.0, code_cosine(u_a, u_b));
}

Matrix dictionary_pair_margins(const SemanticDictionary& dict, const ImageNetConfig& cfg) {
  const std::size_t c = dict.size();
  if (c == 0) throw DataError("dictionary_pair_margins: empty dictionary");
  Matrix m(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (cfg.variant == ImageVariant::mars) {
        m(i, j) = cfg.mars_margin;
      } else if (cfg.margins_from_features) {
        m(i, j) = std::max(0.0, cosine(dict.entry(i).feature, dict.entry(j).feature));
      } else {
        m(i, j) = scalable_margin(dict.entry(i).code, dict.entry(j).code);
      }
    }
  }
  return m;
}

std::vector<std::size_t> resolve_dictionary_indices(const std::vector<LabelVector>& labels,
                                                    const SemanticDictionary& dict,
                                                    const ImageNetConfig& cfg) {
  std::vector<std::size_t> indices;
  indices.reserve(labels.size());
  for (const LabelVector& label : labels) {
    if (dict.find(label)) {
      indices.push_back(dict.index_of(label));
    } else if (cfg.nearest_label_fallback) {
      indices.push_back(dict.index_of(dict.nearest_by_label(label).label));
    } else {
      dict.find_or_throw(label);  // raises with the formatted label
    }
  }
  return indices;
}

double j_ms(const std::vector<RealVector>& g1, const std::vector<RealVector>& g2,
            const Matrix& similar, const Matrix& margins) {
  if (g1.empty() || g2.empty()) throw DataError("j_ms: empty vector list");
  return detail::margin_hinge_grid(g1, g2, similar, margins, 1.0, "j_ms", nullptr, nullptr,
                                   nullptr);
}

namespace {

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -sum_{i,j} (S*theta - softplus(theta)) with theta = <h_i,h_j>/2. Smooth,
// so it feeds no signature bits.
double log_map_grid(const std::vector<RealVector>& hashes, const Matrix& similar, double weight,
                    std::vector<RealVector>* d_hash) {
  if (similar.rows() != hashes.size() || similar.cols() != hashes.size()) {
    throw DimensionError("log_map: similarity grid does not match batch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    for (std::size_t j = 0; j < hashes.size(); ++j) {
      const double theta = 0.5 * inner_product(hashes[i], hashes[j]);
      const double s = similar(i, j);
      loss += stable_softplus(theta) - s * theta;
      if (d_hash) {
        const double d_theta = weight * (stable_sigmoid(theta) - s);
        RealVector& di = (*d_hash)[i];
        RealVector& dj = (*d_hash)[j];
        for (std::size_t k = 0; k < di.size(); ++k) {
          di[k] += d_theta * 0.5 * hashes[j][k];
          dj[k] += d_theta * 0.5 * hashes[i][k];
        }
      }
    }
  }
  return loss;
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

double log_map_pairwise_loss(const std::vector<RealVector>& hashes, const Matrix& similar) {
  if (hashes.empty()) throw DataError("log_map_pairwise_loss: empty batch");
  return log_map_grid(hashes, similar, 1.0, nullptr);
}

void JImgComponents::accumulate(const JImgComponents& other) {
  j_ff += other.j_ff;
  j_hh += other.j_hh;
  j_fq += other.j_fq;
  j_hu += other.j_hu;
  j_cls += other.j_cls;
  j_qnt += other.j_qnt;
  j_map += other.j_map;
  total += other.total;
}

JImgComponents j_img_loss(const std::vector<ForwardRecord>& records,
                          const std::vector<LabelVector>& labels, const SemanticDictionary& dict,
                          const ImageNetConfig& cfg, BatchGrads* grads, BranchHash* signature) {
  if (records.empty()) throw DataError("j_img_loss: empty batch");
  if (records.size() != labels.size()) {
    throw DimensionError("j_img_loss: " + std::to_string(records.size()) + " records vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = records.size();
  if (grads) {
    grads->reset(n, records[0].feature().size(), records[0].hash.size(),
                 records[0].logits.size());
  }

  const std::vector<RealVector> features = collect_features(records);
  const std::vector<RealVector> hashes = collect_hashes(records);
  const std::vector<RealVector> logits = collect_logits(records);
  const Matrix batch_similar = batch_similarity(labels, labels);

  JImgComponents out;
  out.j_cls = detail::classification_term(logits, labels, cfg.eta,
                                          grads ? &grads->d_logits : nullptr);
  out.j_qnt = detail::quantization_term(hashes, cfg.beta, grads ? &grads->d_hash : nullptr,
                                        signature);

  if (cfg.variant == ImageVariant::cos) {
    out.j_map = log_map_grid(hashes, batch_similar, 1.0, grads ? &grads->d_hash : nullptr);
    out.total = out.j_map + cfg.eta * out.j_cls + cfg.beta * out.j_qnt;
    return out;
  }

  const Matrix pair_margins = dictionary_pair_margins(dict, cfg);
  const std::vector<std::size_t> at = resolve_dictionary_indices(labels, dict, cfg);

  Matrix batch_margins(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) batch_margins(i, j) = pair_margins(at[i], at[j]);
  }
  auto* d_f = grads ? &grads->d_feature : nullptr;
  auto* d_h = grads ? &grads->d_hash : nullptr;
  out.j_ff = detail::margin_hinge_grid(features, features, batch_similar, batch_margins,
                                       cfg.alpha, "feature pairs", d_f, d_f, signature);
  out.j_hh = detail::margin_hinge_grid(hashes, hashes, batch_similar, batch_margins, cfg.lambda,
                                       "hash pairs", d_h, d_h, signature);

  if (cfg.variant != ImageVariant::sym) {
    std::vector<LabelVector> dict_labels;
    std::vector<RealVector> dict_features;
    std::vector<RealVector> dict_codes;
    dict_labels.reserve(dict.size());
    for (const DictEntry& entry : dict.entries()) {
      dict_labels.push_back(entry.label);
      dict_features.push_back(entry.feature);
      dict_codes.push_back(entry.code.to_reals());
    }
    const Matrix dict_similar = batch_similarity(labels, dict_labels);
    Matrix dict_margins(n, dict.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dict.size(); ++j) dict_margins(i, j) = pair_margins(at[i], j);
    }
    // Dictionary side is frozen: only the batch side receives gradients.
    out.j_fq = detail::margin_hinge_grid(features, dict_features, dict_similar, dict_margins,
                                         cfg.gamma, "feature-dictionary", d_f, nullptr,
                                         signature);
    out.j_hu = detail::margin_hinge_grid(hashes, dict_codes, dict_similar, dict_margins, cfg.mu,
                                         "hash-dictionary", d_h, nullptr, signature);
  }

  out.total = cfg.alpha * out.j_ff + cfg.lambda * out.j_hh + cfg.gamma * out.j_fq +
              cfg.mu * out.j_hu + cfg.eta * out.j_cls + cfg.beta * out.j_qnt;
  return out;
}

ImageTrainResult train_image(const MultiLabelDataset& ds,
                             const std::vector<std::uint32_t>& train_indices,
                             const SemanticDictionary& dict, const ImageNetConfig& cfg) {
  cfg.validate();
  ds.validate();
  if (train_indices.empty()) throw DataError("train_image: empty train split");
  for (std::uint32_t i : train_indices) {
    if (i >= ds.size()) {
      throw DataError("train_image: split index " + std::to_string(i) + " out of range");
    }
  }
  if (ds.feature_dim() != static_cast<int>(cfg.net.trunk_sizes.front())) {
    throw ConfigError("train_image: dataset features have " + std::to_string(ds.feature_dim()) +
                      " dims, net expects " + std::to_string(cfg.net.trunk_sizes.front()));
  }
  if (static_cast<std::size_t>(ds.num_classes()) != cfg.net.num_classes) {
    throw ConfigError("train_image: dataset classes do not match net");
  }
  if (cfg.variant != ImageVariant::cos) {
    if (dict.size() == 0) throw DataError("train_image: empty dictionary");
    if (dict.entry(0).code.length() != static_cast<int>(cfg.net.code_bits)) {
      throw ConfigError("train_image: dictionary code length does not match net");
    }
    if (cfg.variant != ImageVariant::sym &&
        dict.entry(0).feature.size() != cfg.net.trunk_sizes.back()) {
      throw ConfigError("train_image: dictionary feature width does not match net");
    }
    // Fail on unseen labels now rather than mid-epoch.
    std::vector<LabelVector> train_labels;
    train_labels.reserve(train_indices.size());
    for (std::uint32_t i : train_indices) train_labels.push_back(ds.labels[i]);
    resolve_dictionary_indices(train_labels, dict, cfg);
  }

  ImageTrainResult result{MlpNetwork(cfg.net, cfg.seed), {}};
  MlpNetwork& net = result.net;

  std::mt19937_64 shuffle_rng(cfg.seed + 1);
  MomentumState opt;
  MomentumParams hp = cfg.sgd;
  std::vector<std::size_t> order(train_indices.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> flat(net.param_count());
  BatchGrads bg;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.lr_decay_every > 0 && epoch % cfg.lr_decay_every == 0) {
      hp.lr *= cfg.lr_decay_factor;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    JImgComponents epoch_sum;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<LabelVector> batch;
      std::vector<ForwardRecord> records;
      batch.reserve(stop - start);
      records.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::uint32_t row = train_indices[order[k]];
        batch.push_back(ds.labels[row]);
        records.push_back(net.forward(ds.features.row(row)));
      }

      const JImgComponents comps = j_img_loss(records, batch, dict, cfg, &bg, nullptr);
      if (!std::isfinite(comps.total)) {
        throw NumericError("image training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch starting at item " +
                           std::to_string(start));
      }
      std::fill(flat.begin(), flat.end(), 0.0);
      for (std::size_t i = 0; i < records.size(); ++i) {
        net.backward(records[i], bg.d_feature[i], bg.d_hash[i], bg.d_logits[i], flat);
      }
      sgd_momentum_step(net.parameters(), flat, opt, hp);
      epoch_sum.accumulate(comps);
    }
    result.trace.push_back(epoch_sum);
  }
  return result;
}

LossProbe make_jimg_probe(Matrix features, std::vector<LabelVector> labels,
                          SemanticDictionary dict, ImageNetConfig cfg) {
  return [features = std::move(features), labels = std::move(labels), dict = std::move(dict),
          cfg = std::move(cfg)](const MlpNetwork& net) {
    std::vector<ForwardRecord> records;
    records.reserve(features.rows());
    BranchHash sig;
    for (std::size_t r = 0; r < features.rows(); ++r) {
      records.push_back(net.forward(features.row(r)));
      sig.feed_relu_masks(records.back());
    }
    BatchGrads bg;
    const JImgComponents comps = j_img_loss(records, labels, dict, cfg, &bg, &sig);

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
