#include "asymhash/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "asymhash/errors.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace asymhash {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

double parse_double(const std::string& value, const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
  }
  return v;
}

long long parse_int(const std::string& value, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
  }
  if (used != value.size()) {
    throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& value, const std::string& key) {
  const long long v = parse_int(value, key);
  if (v < 0) throw ConfigError("config: " + key + " must be >= 0, got " + value);
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + value + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& value, const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& cell : detail::split_csv(value)) out.push_back(parse_size(cell, key));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& value, const std::string& key) {
  std::vector<std::uint64_t> out;
  for (const std::string& cell : detail::split_csv(value)) {
    out.push_back(static_cast<std::uint64_t>(parse_size(cell, key)));
  }
  return out;
}

// One dispatch point shared by the file loader and command-line overrides.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "data.n_per_class") cfg.data.n_per_class = parse_size(value, key);
  else if (key == "data.num_classes") cfg.data.num_classes = parse_size(value, key);
  else if (key == "data.feature_dim") cfg.data.feature_dim = parse_size(value, key);
  else if (key == "data.multi_label_prob") cfg.data.multi_label_prob = parse_double(value, key);
  else if (key == "data.noise_sigma") cfg.data.noise_sigma = parse_double(value, key);
  else if (key == "data.dir") cfg.data_dir = value;
  else if (key == "split.per_class_query") cfg.per_class_query = static_cast<int>(parse_int(value, key));
  else if (key == "split.per_class_train") cfg.per_class_train = static_cast<int>(parse_int(value, key));
  else if (key == "split.query_in_database") cfg.query_in_database = parse_bool(value, key);
  else if (key == "model.code_bits") cfg.code_bits = parse_size(value, key);
  else if (key == "model.semantic_hidden") cfg.semantic_hidden = parse_size_list(value, key);
  else if (key == "model.image_hidden") cfg.image_hidden = parse_size_list(value, key);
  else if (key == "semantic.alpha") cfg.semantic.alpha = parse_double(value, key);
  else if (key == "semantic.lambda") cfg.semantic.lambda = parse_double(value, key);
  else if (key == "semantic.eta") cfg.semantic.eta = parse_double(value, key);
  else if (key == "semantic.beta") cfg.semantic.beta = parse_double(value, key);
  else if (key == "semantic.margin") cfg.semantic.margin = parse_double(value, key);
  else if (key == "semantic.epochs") cfg.semantic.epochs = static_cast<int>(parse_int(value, key));
  else if (key == "semantic.batch_size") cfg.semantic.batch_size = parse_size(value, key);
  else if (key == "semantic.lr") cfg.semantic.adam.lr = parse_double(value, key);
  else if (key == "semantic.lr_decay_every") cfg.semantic.lr_decay_every = static_cast<int>(parse_int(value, key));
  else if (key == "semantic.lr_decay_factor") cfg.semantic.lr_decay_factor = parse_double(value, key);
  else if (key == "image.alpha") cfg.image.alpha = parse_double(value, key);
  else if (key == "image.lambda") cfg.image.lambda = parse_double(value, key);
  else if (key == "image.gamma") cfg.image.gamma = parse_double(value, key);
  else if (key == "image.mu") cfg.image.mu = parse_double(value, key);
  else if (key == "image.eta") cfg.image.eta = parse_double(value, key);
  else if (key == "image.beta") cfg.image.beta = parse_double(value, key);
  else if (key == "image.variant") cfg.image.variant = image_variant_from_string(value);
  else if (key == "image.mars_margin") cfg.image.mars_margin = parse_double(value, key);
  else if (key == "image.margins_from_features") cfg.image.margins_from_features = parse_bool(value, key);
  else if (key == "image.nearest_label_fallback") cfg.image.nearest_label_fallback = parse_bool(value, key);
  else if (key == "image.epochs") cfg.image.epochs = static_cast<int>(parse_int(value, key));
  else if (key == "image.batch_size") cfg.image.batch_size = parse_size(value, key);
  else if (key == "image.lr") cfg.image.sgd.lr = parse_double(value, key);
  else if (key == "image.momentum") cfg.image.sgd.momentum = parse_double(value, key);
  else if (key == "image.lr_decay_every") cfg.image.lr_decay_every = static_cast<int>(parse_int(value, key));
  else if (key == "image.lr_decay_factor") cfg.image.lr_decay_factor = parse_double(value, key);
  else if (key == "eval.cutoff") cfg.cutoff = parse_size(value, key);
  else if (key == "eval.pr_sweep") {
    if (value == "radius") cfg.pr_sweep = PrSweep::radius;
    else if (value == "rank") cfg.pr_sweep = PrSweep::rank;
    else throw ConfigError("config: eval.pr_sweep expects radius or rank, got '" + value + "'");
  } else if (key == "eval.topk_max") cfg.topk_max = parse_size(value, key);
  else if (key == "run.seeds") cfg.seeds = parse_seed_list(value, key);
  else if (key == "run.out_dir") cfg.out_dir = value;
  else throw ConfigError("config: unknown key '" + key + "'");
}

void write_csv_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << content;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Desk-scale epoch defaults; the stage structs default lower for tests.
  semantic.epochs = 100;
  image.epochs = 100;
  // Feature-net SGD at the synthetic scale. Larger steps either zero out the
  // ReLU trunk or push the loss to non-finite values within an epoch.
  image.sgd.lr = 1e-4;
}

void ExperimentConfig::validate() const {
  if (data_dir.empty()) {
    if (data.n_per_class < 1) throw ConfigError("experiment: data.n_per_class must be >= 1");
    if (data.num_classes < 1) throw ConfigError("experiment: data.num_classes must be >= 1");
    if (data.feature_dim < 1) throw ConfigError("experiment: data.feature_dim must be >= 1");
    if (data.multi_label_prob < 0.0 || data.multi_label_prob >= 1.0) {
      throw ConfigError("experiment: data.multi_label_prob must be in [0, 1)");
    }
    if (data.noise_sigma < 0.0) throw ConfigError("experiment: data.noise_sigma must be >= 0");
  }
  if (per_class_query < 1) throw ConfigError("experiment: split.per_class_query must be >= 1");
  if (per_class_train < 1) throw ConfigError("experiment: split.per_class_train must be >= 1");
  if (code_bits < 1) throw ConfigError("experiment: model.code_bits must be >= 1");
  if (semantic_hidden.empty() || image_hidden.empty()) {
    throw ConfigError("experiment: hidden layer lists must not be empty");
  }
  for (std::size_t w : semantic_hidden) {
    if (w < 1) throw ConfigError("experiment: semantic_hidden widths must be >= 1");
  }
  for (std::size_t w : image_hidden) {
    if (w < 1) throw ConfigError("experiment: image_hidden widths must be >= 1");
  }
  if (semantic_hidden.back() != image_hidden.back()) {
    throw ConfigError("experiment: feature widths disagree (semantic " +
                      std::to_string(semantic_hidden.back()) + ", image " +
                      std::to_string(image_hidden.back()) +
                      "); the feature dictionary is shared");
  }
  // Stage validators check the scalar fields; dummy dims stand in for the
  // unresolved network shapes.
  SemanticNetConfig sc = semantic;
  sc.net.trunk_sizes = {1, 1};
  sc.net.code_bits = 1;
  sc.net.num_classes = 1;
  sc.net.activations.clear();
  sc.validate();
  ImageNetConfig ic = image;
  ic.net.trunk_sizes = {1, 1};
  ic.net.code_bits = 1;
  ic.net.num_classes = 1;
  ic.net.activations.clear();
  ic.validate();
  if (topk_max < 1) throw ConfigError("experiment: eval.topk_max must be >= 1");
  if (seeds.empty()) throw ConfigError("experiment: run.seeds must not be empty");
  if (out_dir.empty()) throw ConfigError("experiment: run.out_dir must not be empty");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  ExperimentConfig cfg;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError("config " + path.string() + ":" + std::to_string(line_no) +
                         ": malformed section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config " + path.string() + ":" + std::to_string(line_no) +
                       ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ParseError("config " + path.string() + ":" + std::to_string(line_no) +
                       ": key outside any [section]");
    }
    try {
      set_key(cfg, section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (" + path.string() + ":" +
                        std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  set_key(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& cfg) {
  using detail::format_double;
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("data.n_per_class", std::to_string(cfg.data.n_per_class));
  kv.emplace_back("data.num_classes", std::to_string(cfg.data.num_classes));
  kv.emplace_back("data.feature_dim", std::to_string(cfg.data.feature_dim));
  kv.emplace_back("data.multi_label_prob", format_double(cfg.data.multi_label_prob));
  kv.emplace_back("data.noise_sigma", format_double(cfg.data.noise_sigma));
  kv.emplace_back("data.dir", cfg.data_dir.string());
  kv.emplace_back("split.per_class_query", std::to_string(cfg.per_class_query));
  kv.emplace_back("split.per_class_train", std::to_string(cfg.per_class_train));
  kv.emplace_back("split.query_in_database", cfg.query_in_database ? "true" : "false");
  kv.emplace_back("model.code_bits", std::to_string(cfg.code_bits));
  kv.emplace_back("model.semantic_hidden", join_sizes(cfg.semantic_hidden));
  kv.emplace_back("model.image_hidden", join_sizes(cfg.image_hidden));
  kv.emplace_back("semantic.alpha", format_double(cfg.semantic.alpha));
  kv.emplace_back("semantic.lambda", format_double(cfg.semantic.lambda));
  kv.emplace_back("semantic.eta", format_double(cfg.semantic.eta));
  kv.emplace_back("semantic.beta", format_double(cfg.semantic.beta));
  kv.emplace_back("semantic.margin", format_double(cfg.semantic.margin));
  kv.emplace_back("semantic.epochs", std::to_string(cfg.semantic.epochs));
  kv.emplace_back("semantic.batch_size", std::to_string(cfg.semantic.batch_size));
  kv.emplace_back("semantic.lr", format_double(cfg.semantic.adam.lr));
  kv.emplace_back("semantic.lr_decay_every", std::to_string(cfg.semantic.lr_decay_every));
  kv.emplace_back("semantic.lr_decay_factor", format_double(cfg.semantic.lr_decay_factor));
  kv.emplace_back("image.alpha", format_double(cfg.image.alpha));
  kv.emplace_back("image.lambda", format_double(cfg.image.lambda));
  kv.emplace_back("image.gamma", format_double(cfg.image.gamma));
  kv.emplace_back("image.mu", format_double(cfg.image.mu));
  kv.emplace_back("image.eta", format_double(cfg.image.eta));
  kv.emplace_back("image.beta", format_double(cfg.image.beta));
  kv.emplace_back("image.variant", to_string(cfg.image.variant));
  kv.emplace_back("image.mars_margin", format_double(cfg.image.mars_margin));
  kv.emplace_back("image.margins_from_features", cfg.image.margins_from_features ? "true" : "false");
  kv.emplace_back("image.nearest_label_fallback", cfg.image.nearest_label_fallback ? "true" : "false");
  kv.emplace_back("image.epochs", std::to_string(cfg.image.epochs));
  kv.emplace_back("image.batch_size", std::to_string(cfg.image.batch_size));
  kv.emplace_back("image.lr", format_double(cfg.image.sgd.lr));
  kv.emplace_back("image.momentum", format_double(cfg.image.sgd.momentum));
  kv.emplace_back("image.lr_decay_every", std::to_string(cfg.image.lr_decay_every));
  kv.emplace_back("image.lr_decay_factor", format_double(cfg.image.lr_decay_factor));
  kv.emplace_back("eval.cutoff", std::to_string(cfg.cutoff));
  kv.emplace_back("eval.pr_sweep", cfg.pr_sweep == PrSweep::radius ? "radius" : "rank");
  kv.emplace_back("eval.topk_max", std::to_string(cfg.topk_max));
  kv.emplace_back("run.seeds", join_seeds(cfg.seeds));
  kv.emplace_back("run.out_dir", cfg.out_dir.string());
  return kv;
}

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  PreparedData pd;
  if (cfg.data_dir.empty()) {
    pd.ds = generate_synthetic(static_cast<int>(cfg.data.n_per_class),
                               static_cast<int>(cfg.data.num_classes),
                               static_cast<int>(cfg.data.feature_dim),
                               cfg.data.multi_label_prob, cfg.data.noise_sigma, seed);
  } else {
    pd.ds = load_dataset(cfg.data_dir / "features.csv", cfg.data_dir / "labels.csv");
  }
  SplitParams sp;
  sp.per_class_query = cfg.per_class_query;
  sp.per_class_train = cfg.per_class_train;
  sp.query_in_database = cfg.query_in_database;
  sp.seed = seed + 1;
  pd.split = make_split(pd.ds, sp);
  return pd;
}

CodeDatabase encode_labels(const MlpNetwork& net, const MultiLabelDataset& ds,
                           std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw DataError("encode_labels: no items selected");
  std::vector<BinaryCode> codes;
  std::vector<std::uint32_t> ids;
  std::vector<LabelVector> labels;
  codes.reserve(indices.size());
  for (std::uint32_t idx : indices) {
    if (idx >= ds.size()) {
      throw DataError("encode_labels: index " + std::to_string(idx) + " out of range for " +
                      std::to_string(ds.size()) + " items");
    }
    const ForwardRecord record = net.forward(label_to_reals(ds.labels[idx]));
    codes.push_back(sign_binarize(record.hash));
    ids.push_back(ds.ids[idx]);
    labels.push_back(ds.labels[idx]);
  }
  return make_database(std::move(codes), std::move(ids), std::move(labels));
}

std::string image_loss_name(ImageVariant variant) {
  switch (variant) {
    case ImageVariant::full: return "scalable_margin_asymmetric";
    case ImageVariant::sym: return "scalable_margin_symmetric";
    case ImageVariant::mars: return "fixed_margin_asymmetric";
    case ImageVariant::cos: return "log_map_pairwise";
  }
  throw ConfigError("image_loss_name: unknown variant");
}

namespace {

// The pairwise losses normalize feature vectors, so the top trunk layer stays
// linear; a relu top layer can zero out an item under heavy input noise and
// abort training on a degenerate norm.
std::vector<Activation> default_trunk_activations(std::size_t n_layers) {
  std::vector<Activation> acts(n_layers, Activation::relu);
  if (!acts.empty()) acts.back() = Activation::linear;
  return acts;
}

SemanticNetConfig resolve_semantic(const ExperimentConfig& cfg, std::size_t num_classes,
                                   std::uint64_t seed) {
  SemanticNetConfig sc = cfg.semantic;
  sc.net.trunk_sizes.clear();
  sc.net.trunk_sizes.push_back(num_classes);
  sc.net.trunk_sizes.insert(sc.net.trunk_sizes.end(), cfg.semantic_hidden.begin(),
                            cfg.semantic_hidden.end());
  if (sc.net.activations.empty()) {
    sc.net.activations = default_trunk_activations(sc.net.trunk_sizes.size() - 1);
  }
  sc.net.code_bits = cfg.code_bits;
  sc.net.num_classes = num_classes;
  sc.seed = seed + 2;
  return sc;
}

ImageNetConfig resolve_image(const ExperimentConfig& cfg, std::size_t feature_dim,
                             std::size_t num_classes, std::uint64_t seed) {
  ImageNetConfig ic = cfg.image;
  ic.net.trunk_sizes.clear();
  ic.net.trunk_sizes.push_back(feature_dim);
  ic.net.trunk_sizes.insert(ic.net.trunk_sizes.end(), cfg.image_hidden.begin(),
                            cfg.image_hidden.end());
  if (ic.net.activations.empty()) {
    ic.net.activations = default_trunk_activations(ic.net.trunk_sizes.size() - 1);
  }
  ic.net.code_bits = cfg.code_bits;
  ic.net.num_classes = num_classes;
  ic.seed = seed + 3;
  return ic;
}

void write_split_csv(const std::filesystem::path& path, const SplitSpec& split) {
  std::string content = "role,index\n";
  for (std::uint32_t i : split.query) content += "query," + std::to_string(i) + "\n";
  for (std::uint32_t i : split.train) content += "train," + std::to_string(i) + "\n";
  for (std::uint32_t i : split.database) content += "database," + std::to_string(i) + "\n";
  write_csv_file(path, content);
}

}  // namespace

PipelineResult run_pipeline_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& run_dir) {
  cfg.validate();
  std::filesystem::create_directories(run_dir / "metrics");

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["seed"] = seed;
  manifest["derived_seeds"] = {
      {"data", seed}, {"split", seed + 1}, {"semantic", seed + 2}, {"image", seed + 3}};
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : echo_config(cfg)) config[key] = value;
  manifest["config"] = config;
  manifest["image_loss"] = image_loss_name(cfg.image.variant);
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();

  const auto persist = [&](const std::string& status) {
    manifest["status"] = status;
    manifest["stages"] = stages;
    std::ofstream out(run_dir / "manifest.json");
    if (!out) throw ParseError("cannot write " + (run_dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
  };

  PipelineResult result;
  result.run_dir = run_dir;
  result.seed = seed;

  std::string current_stage;
  try {
    current_stage = "prepare_data";
    PreparedData pd = prepare_data(cfg, seed);
    manifest["dataset"] = {{"items", pd.ds.size()},
                           {"classes", pd.ds.num_classes()},
                           {"feature_dim", pd.ds.feature_dim()}};
    manifest["split"] = {{"query", pd.split.query.size()},
                         {"train", pd.split.train.size()},
                         {"database", pd.split.database.size()}};
    write_split_csv(run_dir / "split.csv", pd.split);
    stages.push_back(current_stage);

    current_stage = "train_semantic";
    const SemanticNetConfig sc =
        resolve_semantic(cfg, static_cast<std::size_t>(pd.ds.num_classes()), seed);
    const std::vector<LabelVector> train_labels = gather_labels(pd.ds, pd.split.train);
    SemanticTrainResult semantic = train_semantic(train_labels, sc);
    save_checkpoint(semantic.net, run_dir / "semantic.ckpt");
    stages.push_back(current_stage);

    current_stage = "build_dictionaries";
    const SemanticDictionary dict = build_dictionaries(semantic.net, train_labels);
    save_dictionary(dict, run_dir / "dictionary.csv");
    manifest["dictionary_size"] = dict.size();
    result.dictionary_size = dict.size();
    stages.push_back(current_stage);

    current_stage = "train_image";
    const ImageNetConfig ic = resolve_image(cfg, static_cast<std::size_t>(pd.ds.feature_dim()),
                                            static_cast<std::size_t>(pd.ds.num_classes()), seed);
    ImageTrainResult image = train_image(pd.ds, pd.split.train, dict, ic);
    save_checkpoint(image.net, run_dir / "image.ckpt");
    stages.push_back(current_stage);

    current_stage = "encode";
    const CodeDatabase queries = encode(image.net, pd.ds, pd.split.query);
    const CodeDatabase database = encode(image.net, pd.ds, pd.split.database);
    stages.push_back(current_stage);

    current_stage = "evaluate";
    const RetrievalRun run = evaluate(queries, database, cfg.cutoff, cfg.pr_sweep, cfg.topk_max);
    manifest["metrics"] = {{"map", run.map},
                           {"evaluated_queries", run.evaluated_queries},
                           {"skipped_queries", run.skipped_queries}};
    result.map = run.map;
    result.evaluated_queries = run.evaluated_queries;
    result.skipped_queries = run.skipped_queries;
    stages.push_back(current_stage);

    current_stage = "write_metrics";
    write_pr_csv(run_dir / "metrics" / "pr_curve.csv", run.pr);
    write_topk_csv(run_dir / "metrics" / "topk_precision.csv", run.topk);
    std::vector<std::pair<std::string, std::string>> echo = echo_config(cfg);
    echo.emplace_back("run.seed", std::to_string(seed));
    echo.emplace_back("run.image_loss", image_loss_name(cfg.image.variant));
    write_map_summary(run_dir / "metrics" / "map_summary.json", run, echo);
    stages.push_back(current_stage);
  } catch (const std::exception& e) {
    manifest["failed_stage"] = current_stage;
    manifest["error"] = e.what();
    persist("failed");
    throw;
  }

  persist("ok");
  return result;
}

std::vector<PipelineResult> run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<PipelineResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    results.push_back(run_pipeline_seed(cfg, seed, cfg.out_dir / ("seed_" + std::to_string(seed))));
  }
  return results;
}

std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<AblationRow> rows;
  for (ImageVariant variant :
       {ImageVariant::full, ImageVariant::sym, ImageVariant::mars, ImageVariant::cos}) {
    ExperimentConfig variant_cfg = cfg;
    variant_cfg.image.variant = variant;
    AblationRow row;
    row.variant = variant;
    for (std::uint64_t seed : cfg.seeds) {
      const std::filesystem::path dir =
          cfg.out_dir / to_string(variant) / ("seed_" + std::to_string(seed));
      row.per_seed.push_back(run_pipeline_seed(variant_cfg, seed, dir).map);
    }
    double sum = 0.0;
    for (double m : row.per_seed) sum += m;
    row.mean_map = sum / static_cast<double>(row.per_seed.size());
    rows.push_back(std::move(row));
  }

  std::string csv = "variant,mean_map";
  for (std::uint64_t seed : cfg.seeds) csv += ",map_seed_" + std::to_string(seed);
  csv += "\n";
  for (const AblationRow& row : rows) {
    csv += to_string(row.variant);
    csv += "," + detail::format_double(row.mean_map);
    for (double m : row.per_seed) csv += "," + detail::format_double(m);
    csv += "\n";
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_csv_file(cfg.out_dir / "ablation.csv", csv);
  return rows;
}

std::vector<MarginSweepRow> run_margin_sweep(const ExperimentConfig& cfg,
                                             std::span<const double> margins) {
  cfg.validate();
  if (margins.empty()) throw ConfigError("margin sweep: no margins given");
  for (double m : margins) {
    if (m < 0.0 || m > 1.0) {
      throw ConfigError("margin sweep: margin " + detail::format_double(m) +
                        " outside [0, 1]");
    }
  }

  std::vector<MarginSweepRow> rows(margins.size());
  for (std::size_t i = 0; i < margins.size(); ++i) rows[i].margin = margins[i];

  for (std::uint64_t seed : cfg.seeds) {
    const PreparedData pd = prepare_data(cfg, seed);
    const std::size_t classes = static_cast<std::size_t>(pd.ds.num_classes());
    const std::vector<LabelVector> train_labels = gather_labels(pd.ds, pd.split.train);

    // Dictionaries for the feature-network side come from the base label
    // network; the fixed-margin variant overrides the margins anyway.
    const SemanticNetConfig base_sc = resolve_semantic(cfg, classes, seed);
    const SemanticTrainResult base_semantic = train_semantic(train_labels, base_sc);
    const SemanticDictionary dict = build_dictionaries(base_semantic.net, train_labels);

    for (std::size_t i = 0; i < margins.size(); ++i) {
      SemanticNetConfig sc = base_sc;
      sc.margin = margins[i];
      const SemanticTrainResult semantic = train_semantic(train_labels, sc);
      const CodeDatabase label_queries = encode_labels(semantic.net, pd.ds, pd.split.query);
      const CodeDatabase label_db = encode_labels(semantic.net, pd.ds, pd.split.database);
      rows[i].map_semantic += evaluate(label_queries, label_db, cfg.cutoff).map;

      ImageNetConfig ic = resolve_image(cfg, static_cast<std::size_t>(pd.ds.feature_dim()),
                                        classes, seed);
      ic.variant = ImageVariant::mars;
      ic.mars_margin = margins[i];
      const ImageTrainResult image = train_image(pd.ds, pd.split.train, dict, ic);
      const CodeDatabase queries = encode(image.net, pd.ds, pd.split.query);
      const CodeDatabase database = encode(image.net, pd.ds, pd.split.database);
      rows[i].map_image += evaluate(queries, database, cfg.cutoff).map;
    }
  }

  const double n_seeds = static_cast<double>(cfg.seeds.size());
  std::string csv = "margin,map_semantic,map_image\n";
  for (MarginSweepRow& row : rows) {
    row.map_semantic /= n_seeds;
    row.map_image /= n_seeds;
    csv += detail::format_double(row.margin);
    csv += "," + detail::format_double(row.map_semantic);
    csv += "," + detail::format_double(row.map_image);
    csv += "\n";
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_csv_file(cfg.out_dir / "margin_sweep.csv", csv);
  return rows;
}

}  // namespace asymhash
