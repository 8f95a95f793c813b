#pragma once

// Config-driven orchestration of the two-stage pipeline: data preparation,
// label-network training, dictionary construction, feature-network training,
// encoding, and retrieval metrics, with every artifact written under one
// self-describing run directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asymhash/dataset.hpp"
#include "asymhash/eval.hpp"
#include "asymhash/image.hpp"
#include "asymhash/semantic.hpp"

namespace asymhash {

/// Synthetic dataset knobs, mirrored by the [data] config section.
struct SyntheticSpec {
  std::size_t n_per_class = 100;
  std::size_t num_classes = 4;
  std::size_t feature_dim = 32;
  double multi_label_prob = 0.0;
  double noise_sigma = 0.1;
};

/// One experiment, validated before any work starts. Network input widths
/// are resolved from the dataset at run time; everything else is explicit.
/// Per-stage RNG seeds derive from the run seed s: data s, split s+1,
/// label net s+2, feature net s+3, text modality s+4.
struct ExperimentConfig {
  SyntheticSpec data;
  std::filesystem::path data_dir;  // nonempty: load features.csv/labels.csv instead

  int per_class_query = 25;
  int per_class_train = 50;
  bool query_in_database = false;

  std::size_t code_bits = 16;
  std::vector<std::size_t> semantic_hidden{256, 128};
  std::vector<std::size_t> image_hidden{256, 128};

  SemanticNetConfig semantic;  // net dims filled at run time
  ImageNetConfig image;        // net dims filled at run time

  std::size_t cutoff = kCutoffAll;
  PrSweep pr_sweep = PrSweep::radius;
  std::size_t topk_max = 1000;

  std::vector<std::uint64_t> seeds{7};
  std::filesystem::path out_dir = "runs";

  ExperimentConfig();

  /// Rejects invalid values without touching data or networks. Throws
  /// ConfigError.
  void validate() const;
};

/// Parses the key/value config format ([section] headers, key = value,
/// '#' comments). Unknown keys are errors. Missing keys keep defaults.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Applies one "section.key=value" override on top of a config.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Every effective config value as documented "section.key" pairs, in
/// stable order. Echoed into manifests and summaries.
std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& cfg);

/// Dataset plus split for one run seed: synthetic generation (data seed)
/// or CSV ingestion, then the per-class split (split seed).
struct PreparedData {
  MultiLabelDataset ds;
  SplitSpec split;
};
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Codes obtained by pushing items' label vectors through the label
/// network: the Stage-1 side of retrieval.
CodeDatabase encode_labels(const MlpNetwork& net, const MultiLabelDataset& ds,
                           std::span<const std::uint32_t> indices);

/// Stable loss-name string recorded in manifests ("log_map_pairwise" for
/// the logistic variant, margin names otherwise).
std::string image_loss_name(ImageVariant variant);

struct PipelineResult {
  std::filesystem::path run_dir;
  std::uint64_t seed = 0;
  double map = 0.0;
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;
  std::size_t dictionary_size = 0;
};

/// One full run for one seed: artifacts land in run_dir (manifest.json,
/// split.csv, dictionary.csv, semantic.ckpt, image.ckpt, metrics/). A stage
/// failure persists a manifest naming the failed stage, then rethrows.
PipelineResult run_pipeline_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& run_dir);

/// Runs every seed in cfg.seeds into out_dir/seed_<s>/.
std::vector<PipelineResult> run_pipeline(const ExperimentConfig& cfg);

struct AblationRow {
  ImageVariant variant = ImageVariant::full;
  double mean_map = 0.0;
  std::vector<double> per_seed;
};

/// Four pipelines per seed differing only in the feature-network variant;
/// writes out_dir/ablation.csv (variant, mean MAP, per-seed MAPs).
std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& cfg);

struct MarginSweepRow {
  double margin = 0.0;
  double map_semantic = 0.0;
  double map_image = 0.0;
};

/// For each margin m: the label network retrains with hinge margin m and is
/// scored by label-code retrieval; the feature network trains with the
/// fixed-margin variant at m against dictionaries from a margin-0 label
/// network. MAPs are seed means. Writes out_dir/margin_sweep.csv. Margins
/// must lie in [0, 1].
std::vector<MarginSweepRow> run_margin_sweep(const ExperimentConfig& cfg,
                                             std::span<const double> margins);

}  // namespace asymhash
