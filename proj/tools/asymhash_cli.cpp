// Command-line driver for the hashing pipeline: data generation, the two
// training stages, retrieval evaluation, and the experiment suites. One
// experiment per process; all artifacts land under the configured run
// directory.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asymhash/crossmodal.hpp"
#include "asymhash/experiment.hpp"

using namespace asymhash;

namespace {

// Exit codes: 0 success, 2 config, 3 data/parse, 4 numeric, 1 anything else.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitOther = 1;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "experiment config file");
  cmd->add_option("-s,--set", args.overrides,
                  "override a config value as section.key=value (repeatable)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = load_experiment_config(args.config_path);
  for (const std::string& assignment : args.overrides) apply_override(cfg, assignment);
  cfg.validate();
  return cfg;
}

std::uint64_t first_seed(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("run.seeds must not be empty");
  return cfg.seeds[0];
}

// Doubles in CSV output round trip exactly, matching the library's writers.
std::string format_map(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// The standalone stage commands share the pipeline's seed derivation so a
// stage-by-stage run reproduces `pipeline` exactly.
int cmd_gen_data(const CommonArgs& args, const std::string& out_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::uint64_t seed = first_seed(cfg);
  const PreparedData pd = prepare_data(cfg, seed);
  std::filesystem::create_directories(out_dir);
  save_dataset(pd.ds, out_dir);
  std::printf("wrote %zu items (%d classes, %d features) to %s\n", pd.ds.size(),
              pd.ds.num_classes(), pd.ds.feature_dim(), out_dir.c_str());
  return 0;
}

int cmd_train_semantic(const CommonArgs& args, const std::string& out_path) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::uint64_t seed = first_seed(cfg);
  const PreparedData pd = prepare_data(cfg, seed);
  SemanticNetConfig sc = cfg.semantic;
  sc.net.trunk_sizes.clear();
  sc.net.trunk_sizes.push_back(static_cast<std::size_t>(pd.ds.num_classes()));
  sc.net.trunk_sizes.insert(sc.net.trunk_sizes.end(), cfg.semantic_hidden.begin(),
                            cfg.semantic_hidden.end());
  sc.net.code_bits = cfg.code_bits;
  sc.net.num_classes = static_cast<std::size_t>(pd.ds.num_classes());
  sc.seed = seed + 2;

  std::vector<LabelVector> labels;
  labels.reserve(pd.split.train.size());
  for (std::uint32_t idx : pd.split.train) labels.push_back(pd.ds.labels[idx]);
  const SemanticTrainResult result = train_semantic(labels, sc);
  save_checkpoint(result.net, out_path);
  std::printf("label net trained for %zu epochs, final loss %.6f, saved to %s\n",
              result.trace.size(), result.trace.back().total, out_path.c_str());
  return 0;
}

int cmd_build_dict(const CommonArgs& args, const std::string& net_path,
                   const std::string& out_path) {
  const ExperimentConfig cfg = resolve_config(args);
  const PreparedData pd = prepare_data(cfg, first_seed(cfg));
  const MlpNetwork net = load_checkpoint(net_path);
  std::vector<LabelVector> labels;
  labels.reserve(pd.split.train.size());
  for (std::uint32_t idx : pd.split.train) labels.push_back(pd.ds.labels[idx]);
  const SemanticDictionary dict = build_dictionaries(net, labels);
  save_dictionary(dict, out_path);
  std::printf("dictionary with %zu distinct labels saved to %s\n", dict.size(),
              out_path.c_str());
  return 0;
}

int cmd_train_image(const CommonArgs& args, const std::string& dict_path,
                    const std::string& out_path) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::uint64_t seed = first_seed(cfg);
  const PreparedData pd = prepare_data(cfg, seed);
  const SemanticDictionary dict = load_dictionary(dict_path);
  ImageNetConfig ic = cfg.image;
  ic.net.trunk_sizes.clear();
  ic.net.trunk_sizes.push_back(static_cast<std::size_t>(pd.ds.feature_dim()));
  ic.net.trunk_sizes.insert(ic.net.trunk_sizes.end(), cfg.image_hidden.begin(),
                            cfg.image_hidden.end());
  ic.net.code_bits = cfg.code_bits;
  ic.net.num_classes = static_cast<std::size_t>(pd.ds.num_classes());
  ic.seed = seed + 3;
  const ImageTrainResult result = train_image(pd.ds, pd.split.train, dict, ic);
  save_checkpoint(result.net, out_path);
  std::printf("feature net (%s) trained for %zu epochs, final loss %.6f, saved to %s\n",
              to_string(cfg.image.variant), result.trace.size(), result.trace.back().total,
              out_path.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& net_path, const std::string& out_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  const PreparedData pd = prepare_data(cfg, first_seed(cfg));
  const MlpNetwork net = load_checkpoint(net_path);
  const CodeDatabase queries = encode(net, pd.ds, pd.split.query);
  const CodeDatabase database = encode(net, pd.ds, pd.split.database);
  const RetrievalRun run = evaluate(queries, database, cfg.cutoff, cfg.pr_sweep, cfg.topk_max);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  write_pr_csv(out / "pr_curve.csv", run.pr);
  write_topk_csv(out / "topk_precision.csv", run.topk);
  std::vector<std::pair<std::string, std::string>> echo = echo_config(cfg);
  echo.emplace_back("run.image_loss", image_loss_name(cfg.image.variant));
  write_map_summary(out / "map_summary.json", run, echo);
  std::printf("MAP %.6f over %zu queries (%zu skipped), metrics in %s\n", run.map,
              run.evaluated_queries, run.skipped_queries, out_dir.c_str());
  return 0;
}

int cmd_pipeline(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::vector<PipelineResult> results = run_pipeline(cfg);
  for (const PipelineResult& res : results) {
    std::printf("seed %llu: MAP %.6f (%zu queries, %zu skipped) -> %s\n",
                static_cast<unsigned long long>(res.seed), res.map, res.evaluated_queries,
                res.skipped_queries, res.run_dir.string().c_str());
  }
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::vector<AblationRow> rows = run_ablation_suite(cfg);
  std::printf("%-6s %-10s per-seed\n", "loss", "mean_map");
  for (const AblationRow& row : rows) {
    std::printf("%-6s %-10.6f", to_string(row.variant), row.mean_map);
    for (double v : row.per_seed) std::printf(" %.6f", v);
    std::printf("\n");
  }
  std::printf("table written to %s\n", (cfg.out_dir / "ablation.csv").string().c_str());
  return 0;
}

int cmd_sweep_margin(const CommonArgs& args, const std::vector<double>& margins) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::vector<MarginSweepRow> rows = run_margin_sweep(cfg, margins);
  std::printf("%-8s %-14s %s\n", "margin", "map_semantic", "map_image");
  for (const MarginSweepRow& row : rows) {
    std::printf("%-8.3f %-14.6f %.6f\n", row.margin, row.map_semantic, row.map_image);
  }
  std::printf("table written to %s\n", (cfg.out_dir / "margin_sweep.csv").string().c_str());
  return 0;
}

int cmd_crossmodal(const CommonArgs& args, std::size_t text_dim, double text_active,
                   double text_noise) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::uint64_t seed = first_seed(cfg);
  const PreparedData pd = prepare_data(cfg, seed);

  TextModalityParams text;
  text.dim = text_dim;
  text.active_fraction = text_active;
  text.noise_sigma = text_noise;
  text.seed = seed + 4;
  const BiModalDataset bimodal = attach_text_modality(pd.ds, "image", text);

  SemanticNetConfig sc = cfg.semantic;
  sc.net.trunk_sizes.clear();
  sc.net.trunk_sizes.push_back(static_cast<std::size_t>(pd.ds.num_classes()));
  sc.net.trunk_sizes.insert(sc.net.trunk_sizes.end(), cfg.semantic_hidden.begin(),
                            cfg.semantic_hidden.end());
  sc.net.code_bits = cfg.code_bits;
  sc.net.num_classes = static_cast<std::size_t>(pd.ds.num_classes());
  sc.seed = seed + 2;
  std::vector<LabelVector> labels;
  labels.reserve(pd.split.train.size());
  for (std::uint32_t idx : pd.split.train) labels.push_back(pd.ds.labels[idx]);
  const SemanticTrainResult semantic = train_semantic(labels, sc);
  const SemanticDictionary dict = build_dictionaries(semantic.net, labels);

  std::vector<ImageNetConfig> modality_cfgs;
  for (std::size_t m = 0; m < bimodal.modalities.size(); ++m) {
    ImageNetConfig ic = cfg.image;
    ic.net.trunk_sizes.clear();
    ic.net.trunk_sizes.push_back(bimodal.modalities[m].features.cols());
    ic.net.trunk_sizes.insert(ic.net.trunk_sizes.end(), cfg.image_hidden.begin(),
                              cfg.image_hidden.end());
    ic.net.code_bits = cfg.code_bits;
    ic.net.num_classes = static_cast<std::size_t>(pd.ds.num_classes());
    ic.seed = seed + 3 + m;
    modality_cfgs.push_back(ic);
  }
  const CrossModalTrainResult trained = train_crossmodal(bimodal, pd.split.train, dict,
                                                         modality_cfgs);

  std::filesystem::create_directories(cfg.out_dir);
  std::string csv = "query_modality,database_modality,map\n";
  for (std::size_t q = 0; q < bimodal.modalities.size(); ++q) {
    for (std::size_t d = 0; d < bimodal.modalities.size(); ++d) {
      const RetrievalRun run = crossmodal_eval(trained.runs[q].net, q, trained.runs[d].net, d,
                                               bimodal, pd.split, cfg.cutoff);
      std::printf("%s -> %s: MAP %.6f\n", bimodal.modalities[q].name.c_str(),
                  bimodal.modalities[d].name.c_str(), run.map);
      csv += bimodal.modalities[q].name + "," + bimodal.modalities[d].name + "," +
             format_map(run.map) + "\n";
    }
  }
  std::ofstream out(cfg.out_dir / "crossmodal.csv");
  if (!out) throw ParseError("cannot write " + (cfg.out_dir / "crossmodal.csv").string());
  out << csv;
  std::printf("table written to %s\n", (cfg.out_dir / "crossmodal.csv").string().c_str());
  return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const std::uint64_t seed = first_seed(cfg);

  // Small dims keep the finite-difference loop fast while touching every
  // parameter of both loss surfaces.
  const MultiLabelDataset ds = generate_synthetic(6, 3, 5, 0.3, 0.2, seed);
  std::vector<LabelVector> labels(ds.labels.begin(), ds.labels.begin() + 8);

  SemanticNetConfig sc = cfg.semantic;
  sc.net.trunk_sizes = {3, 6, 4};
  sc.net.activations = {Activation::relu, Activation::linear};
  sc.net.code_bits = 4;
  sc.net.num_classes = 3;
  sc.batch_size = 8;
  sc.seed = seed + 2;
  MlpNetwork label_net(sc.net, sc.seed);
  GradCheckOptions opts;
  const GradCheckReport lab = finite_difference_check(label_net, make_jlab_probe(labels, sc),
                                                      opts);
  std::printf("label loss: max relative error %.3e over %zu parameters\n", lab.max_rel_error,
              lab.checked);
  bool ok = lab.max_rel_error <= opts.tolerance;

  const SemanticTrainResult semantic = train_semantic(labels, sc);
  const SemanticDictionary dict = build_dictionaries(semantic.net, labels);
  Matrix batch_features(8, ds.feature_dim());
  std::vector<LabelVector> batch_labels;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(ds.feature_dim()); ++j) {
      batch_features(i, j) = ds.features(i, j);
    }
    batch_labels.push_back(ds.labels[i]);
  }
  for (ImageVariant variant :
       {ImageVariant::full, ImageVariant::sym, ImageVariant::mars, ImageVariant::cos}) {
    ImageNetConfig ic = cfg.image;
    ic.variant = variant;
    ic.net.trunk_sizes = {static_cast<std::size_t>(ds.feature_dim()), 6, 4};
    ic.net.activations = {Activation::relu, Activation::linear};
    ic.net.code_bits = 4;
    ic.net.num_classes = 3;
    ic.batch_size = 8;
    ic.seed = seed + 3;
    MlpNetwork feature_net(ic.net, ic.seed);
    const GradCheckReport img = finite_difference_check(
        feature_net, make_jimg_probe(batch_features, batch_labels, dict, ic), opts);
    std::printf("feature loss (%s): max relative error %.3e over %zu parameters\n",
                to_string(variant), img.max_rel_error, img.checked);
    ok = ok && img.max_rel_error <= opts.tolerance;
  }

  if (!ok) {
    std::fprintf(stderr, "gradient check exceeded tolerance %.1e\n", opts.tolerance);
    return kExitNumeric;
  }
  std::printf("all gradients within tolerance %.1e\n", opts.tolerance);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage semantic hashing: label-net guidance, feature-net training, "
               "Hamming retrieval"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir = "data";
  std::string out_path;
  std::string net_path;
  std::string dict_path;
  std::vector<double> margins{0.0, 0.1, 0.2, 0.3};
  std::size_t text_dim = 64;
  double text_active = 0.1;
  double text_noise = 0.05;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset and save it");
  add_common(gen, common);
  gen->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

  CLI::App* ts = app.add_subcommand("train-semantic", "train the label network");
  add_common(ts, common);
  out_path = "semantic.ckpt";
  ts->add_option("-o,--out", out_path, "checkpoint path")->capture_default_str();

  CLI::App* bd = app.add_subcommand("build-dict", "build semantic dictionaries from a "
                                                  "label-net checkpoint");
  add_common(bd, common);
  bd->add_option("-n,--net", net_path, "label-net checkpoint")->required();
  bd->add_option("-o,--out", dict_path, "dictionary output path")->required();

  CLI::App* ti = app.add_subcommand("train-image", "train the feature network against a "
                                                   "dictionary");
  add_common(ti, common);
  ti->add_option("-d,--dict", dict_path, "dictionary path")->required();
  ti->add_option("-o,--out", out_path, "checkpoint path")->required();

  CLI::App* ev = app.add_subcommand("eval", "encode splits with a checkpoint and report "
                                            "retrieval metrics");
  add_common(ev, common);
  ev->add_option("-n,--net", net_path, "feature-net checkpoint")->required();
  ev->add_option("-o,--out", out_dir, "metrics output directory")->required();

  CLI::App* pl = app.add_subcommand("pipeline", "run the full two-stage pipeline per seed");
  add_common(pl, common);

  CLI::App* ab = app.add_subcommand("ablate", "run all four loss variants and tabulate MAP");
  add_common(ab, common);

  CLI::App* sw = app.add_subcommand("sweep-margin", "sweep fixed margins over both networks");
  add_common(sw, common);
  sw->add_option("-m,--margins", margins, "margin values in [0,1]")->capture_default_str();

  CLI::App* cm = app.add_subcommand("crossmodal", "train image and synthetic-text networks "
                                                  "into one code space");
  add_common(cm, common);
  cm->add_option("--text-dim", text_dim, "text vocabulary size")->capture_default_str();
  cm->add_option("--text-active", text_active, "fraction of active words per class")
      ->capture_default_str();
  cm->add_option("--text-noise", text_noise, "noise sigma on active text entries")
      ->capture_default_str();

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of both loss "
                                                 "gradients");
  add_common(gc, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common, out_dir);
    if (ts->parsed()) return cmd_train_semantic(common, out_path);
    if (bd->parsed()) return cmd_build_dict(common, net_path, dict_path);
    if (ti->parsed()) return cmd_train_image(common, dict_path, out_path);
    if (ev->parsed()) return cmd_eval(common, net_path, out_dir);
    if (pl->parsed()) return cmd_pipeline(common);
    if (ab->parsed()) return cmd_ablate(common);
    if (sw->parsed()) return cmd_sweep_margin(common, margins);
    if (cm->parsed()) return cmd_crossmodal(common, text_dim, text_active, text_noise);
    if (gc->parsed()) return cmd_gradcheck(common);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitData;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const DegenerateVectorError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
