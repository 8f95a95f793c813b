#include "asymhash/crossmodal.hpp"

#include <random>

#include "asymhash/errors.hpp"

namespace asymhash {

void BiModalDataset::validate() const {
  if (modalities.empty()) throw DataError("bimodal: no modalities");
  for (const Modality& m : modalities) {
    if (m.features.rows() != labels.size()) {
      throw DataError("bimodal: modality " + m.name + " has " +
                      std::to_string(m.features.rows()) + " rows for " +
                      std::to_string(labels.size()) + " items");
    }
  }
  // Labels and ids obey the single-modality rules; borrow that check.
  modality_view(0).validate();
}

MultiLabelDataset BiModalDataset::modality_view(std::size_t index) const {
  if (index >= modalities.size()) {
    throw LookupError("bimodal: modality index " + std::to_string(index) + " out of range");
  }
  MultiLabelDataset view;
  view.features = modalities[index].features;
  view.labels = labels;
  view.ids = ids;
  return view;
}

std::size_t BiModalDataset::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == name) return i;
  }
  throw LookupError("bimodal: no modality named " + name);
}

Matrix generate_text_modality(const std::vector<LabelVector>& labels,
                              const TextModalityParams& params) {
  if (labels.empty()) throw DataError("text modality: no items");
  if (params.dim == 0) throw ConfigError("text modality: dim must be >= 1");
  if (!(params.active_fraction > 0.0) || params.active_fraction > 1.0) {
    throw ConfigError("text modality: active_fraction must be in (0, 1]");
  }
  if (params.noise_sigma < 0.0) throw ConfigError("text modality: noise_sigma must be >= 0");

  const std::size_t classes = labels[0].size();
  std::mt19937_64 rng(params.seed);
  std::bernoulli_distribution active(params.active_fraction);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Per-class vocabulary signature; every class keeps at least one word so
  // no item can collapse to an all-zero row.
  std::vector<RealVector> signature(classes, RealVector(params.dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    bool any = false;
    for (std::size_t w = 0; w < params.dim; ++w) {
      if (active(rng)) {
        signature[c][w] = weight(rng);
        any = true;
      }
    }
    if (!any) signature[c][rng() % params.dim] = weight(rng);
  }

  Matrix out(labels.size(), params.dim);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].size() != classes) {
      throw DataError("text modality: label row " + std::to_string(i) + " has " +
                      std::to_string(labels[i].size()) + " classes, expected " +
                      std::to_string(classes));
    }
    auto row = out.row(i);
    for (std::size_t c = 0; c < classes; ++c) {
      if (labels[i][c] == 0) continue;
      for (std::size_t w = 0; w < params.dim; ++w) row[w] += signature[c][w];
    }
    if (params.noise_sigma > 0.0) {
      for (std::size_t w = 0; w < params.dim; ++w) {
        if (row[w] != 0.0) row[w] += params.noise_sigma * noise(rng);
      }
    }
  }
  return out;
}

BiModalDataset attach_text_modality(const MultiLabelDataset& ds, const std::string& first_name,
                                    const TextModalityParams& params) {
  ds.validate();
  BiModalDataset out;
  out.labels = ds.labels;
  out.ids = ds.ids;
  out.modalities.push_back({first_name, ds.features});
  out.modalities.push_back({"text", generate_text_modality(ds.labels, params)});
  return out;
}

CrossModalTrainResult train_crossmodal(const BiModalDataset& ds,
                                       std::span<const std::uint32_t> train_indices,
                                       const SemanticDictionary& dict,
                                       std::span<const ImageNetConfig> cfgs) {
  ds.validate();
  if (cfgs.size() != ds.modalities.size()) {
    throw ConfigError("crossmodal: " + std::to_string(cfgs.size()) + " configs for " +
                      std::to_string(ds.modalities.size()) + " modalities");
  }
  CrossModalTrainResult result;
  const std::vector<std::uint32_t> indices(train_indices.begin(), train_indices.end());
  for (std::size_t j = 0; j < ds.modalities.size(); ++j) {
    result.modality_names.push_back(ds.modalities[j].name);
    result.runs.push_back(train_image(ds.modality_view(j), indices, dict, cfgs[j]));
  }
  return result;
}

RetrievalRun crossmodal_eval(const MlpNetwork& net_query, std::size_t query_modality,
                             const MlpNetwork& net_db, std::size_t db_modality,
                             const BiModalDataset& ds, const SplitSpec& split,
                             std::size_t cutoff) {
  ds.validate();
  if (net_query.code_bits() != net_db.code_bits()) {
    throw DimensionError("crossmodal: query network emits " +
                         std::to_string(net_query.code_bits()) + " bits, database network " +
                         std::to_string(net_db.code_bits()));
  }
  const MultiLabelDataset query_view = ds.modality_view(query_modality);
  const MultiLabelDataset db_view = ds.modality_view(db_modality);
  const CodeDatabase queries = encode(net_query, query_view, split.query);
  const CodeDatabase database = encode(net_db, db_view, split.database);
  return evaluate(queries, database, cutoff);
}

}  // namespace asymhash
