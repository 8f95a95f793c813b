#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "asymhash/experiment.hpp"
#include "json.hpp"

using namespace asymhash;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("asymhash_exp_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Small enough that a full pipeline run stays under a second.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.data.n_per_class = 12;
  cfg.data.num_classes = 3;
  cfg.data.feature_dim = 8;
  cfg.data.multi_label_prob = 0.0;
  cfg.data.noise_sigma = 0.2;
  cfg.per_class_query = 3;
  cfg.per_class_train = 5;
  cfg.code_bits = 8;
  cfg.semantic_hidden = {8, 4};
  cfg.image_hidden = {8, 4};
  cfg.semantic.epochs = 3;
  cfg.semantic.batch_size = 8;
  cfg.image.epochs = 3;
  cfg.image.batch_size = 8;
  cfg.seeds = {5};
  cfg.topk_max = 10;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& p) {
  return nlohmann::json::parse(slurp(p));
}

}  // namespace

TEST_CASE("experiment config validation") {
  CHECK_NOTHROW(tiny_config().validate());

  auto broken = [](auto mutate) {
    ExperimentConfig cfg = tiny_config();
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(broken([](auto& c) { c.data.n_per_class = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.data.num_classes = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.data.multi_label_prob = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.data.noise_sigma = -0.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.per_class_query = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.per_class_train = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.code_bits = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.semantic_hidden.clear(); }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.image_hidden = {8, 0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.image_hidden = {8, 6}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.semantic.batch_size = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.image.epochs = -1; }).validate(), ConfigError);

  // A dataset directory bypasses the synthetic-spec checks only.
  ExperimentConfig from_dir = tiny_config();
  from_dir.data_dir = "somewhere";
  from_dir.data.n_per_class = 0;
  CHECK_NOTHROW(from_dir.validate());
}

TEST_CASE("config file loads every section") {
  TempDir tmp;
  const auto ini = tmp.path / "exp.ini";
  {
    std::ofstream out(ini);
    out << "# synthetic retrieval experiment\n"
        << "[data]\n"
        << "n_per_class = 20\n"
        << "num_classes = 5\n"
        << "feature_dim = 12\n"
        << "multi_label_prob = 0.25\n"
        << "noise_sigma = 0.4\n"
        << "\n"
        << "[split]\n"
        << "per_class_query = 4\n"
        << "per_class_train = 6\n"
        << "query_in_database = true\n"
        << "[model]\n"
        << "code_bits = 12\n"
        << "semantic_hidden = 16,8\n"
        << "image_hidden = 24,8\n"
        << "[semantic]\n"
        << "alpha = 1.5\n"
        << "margin = 0.1\n"
        << "epochs = 7\n"
        << "lr = 0.002\n"
        << "[image]\n"
        << "variant = mars\n"
        << "mars_margin = 0.35\n"
        << "momentum = 0.8\n"
        << "epochs = 9\n"
        << "[eval]\n"
        << "cutoff = 50\n"
        << "pr_sweep = rank\n"
        << "topk_max = 17\n"
        << "[run]\n"
        << "seeds = 3,4,5\n"
        << "out_dir = " << (tmp.path / "out").string() << "\n";
  }
  const ExperimentConfig cfg = load_experiment_config(ini);
  CHECK(cfg.data.n_per_class == 20);
  CHECK(cfg.data.num_classes == 5);
  CHECK(cfg.data.feature_dim == 12);
  CHECK(cfg.data.multi_label_prob == doctest::Approx(0.25));
  CHECK(cfg.data.noise_sigma == doctest::Approx(0.4));
  CHECK(cfg.per_class_query == 4);
  CHECK(cfg.per_class_train == 6);
  CHECK(cfg.query_in_database);
  CHECK(cfg.code_bits == 12);
  CHECK(cfg.semantic_hidden == std::vector<std::size_t>{16, 8});
  CHECK(cfg.image_hidden == std::vector<std::size_t>{24, 8});
  CHECK(cfg.semantic.alpha == doctest::Approx(1.5));
  CHECK(cfg.semantic.margin == doctest::Approx(0.1));
  CHECK(cfg.semantic.epochs == 7);
  CHECK(cfg.semantic.adam.lr == doctest::Approx(0.002));
  CHECK(cfg.image.variant == ImageVariant::mars);
  CHECK(cfg.image.mars_margin == doctest::Approx(0.35));
  CHECK(cfg.image.sgd.momentum == doctest::Approx(0.8));
  CHECK(cfg.image.epochs == 9);
  CHECK(cfg.cutoff == 50);
  CHECK(cfg.pr_sweep == PrSweep::rank);
  CHECK(cfg.topk_max == 17);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(cfg.out_dir == tmp.path / "out");
}

TEST_CASE("config file rejects malformed input") {
  TempDir tmp;
  CHECK_THROWS_AS(load_experiment_config(tmp.path / "missing.ini"), ParseError);

  auto write_and_load = [&](const std::string& body) {
    const auto p = tmp.path / "bad.ini";
    std::ofstream(p) << body;
    return load_experiment_config(p);
  };
  CHECK_THROWS_AS(write_and_load("[data]\njust a line\n"), ParseError);
  CHECK_THROWS_AS(write_and_load("[data]\nbogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(write_and_load("[bogus]\nn_per_class = 1\n"), ConfigError);
  CHECK_THROWS_AS(write_and_load("[data]\nn_per_class = abc\n"), ConfigError);
  CHECK_THROWS_AS(write_and_load("[image]\nvariant = nonsense\n"), ConfigError);
}

TEST_CASE("override assignments") {
  ExperimentConfig cfg = tiny_config();
  apply_override(cfg, "image.lr=0.5");
  CHECK(cfg.image.sgd.lr == doctest::Approx(0.5));
  apply_override(cfg, "model.code_bits=24");
  CHECK(cfg.code_bits == 24);
  apply_override(cfg, "run.seeds=11,12");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{11, 12});
  apply_override(cfg, "split.query_in_database=1");
  CHECK(cfg.query_in_database);

  CHECK_THROWS_AS(apply_override(cfg, "image.lr"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "image.unknown=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "image.lr=oops"), ConfigError);
}

TEST_CASE("config echo round trips through overrides") {
  const ExperimentConfig cfg = tiny_config();
  ExperimentConfig copy = tiny_config();
  for (const auto& [key, value] : echo_config(cfg)) {
    CAPTURE(key);
    CHECK_NOTHROW(apply_override(copy, key + "=" + value));
  }
  CHECK(echo_config(copy) == echo_config(cfg));
}

TEST_CASE("prepare_data is seed-deterministic") {
  const ExperimentConfig cfg = tiny_config();
  const PreparedData a = prepare_data(cfg, 5);
  const PreparedData b = prepare_data(cfg, 5);
  CHECK(a.ds.features == b.ds.features);
  CHECK(a.ds.labels == b.ds.labels);
  CHECK(a.split.query == b.split.query);
  CHECK(a.split.train == b.split.train);
  CHECK(a.split.database == b.split.database);

  CHECK(a.split.query.size() == 9);
  CHECK(a.split.train.size() == 15);
  CHECK(a.split.database.size() == 27);

  const PreparedData c = prepare_data(cfg, 6);
  CHECK(a.split.query != c.split.query);

  ExperimentConfig inclusive = cfg;
  inclusive.query_in_database = true;
  CHECK(prepare_data(inclusive, 5).split.database.size() == 36);
}

TEST_CASE("encode_labels binarizes the label network output") {
  const ExperimentConfig cfg = tiny_config();
  const PreparedData pd = prepare_data(cfg, 5);

  MlpConfig mc;
  mc.trunk_sizes = {3, 4};
  mc.code_bits = 8;
  mc.num_classes = 3;
  const MlpNetwork net(mc, 17);

  const std::vector<std::uint32_t> indices{0, 7, 20};
  const CodeDatabase db = encode_labels(net, pd.ds, indices);
  CHECK(db.size() == 3);
  CHECK(db.code_bits == 8);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto expected = sign_binarize(net.forward(label_to_reals(pd.ds.labels[indices[i]])).hash);
    CHECK(db.codes[i] == expected);
    CHECK(db.ids[i] == pd.ds.ids[indices[i]]);
    CHECK(db.labels[i] == pd.ds.labels[indices[i]]);
  }

  CHECK_THROWS_AS(encode_labels(net, pd.ds, std::vector<std::uint32_t>{}), DataError);
  CHECK_THROWS_AS(encode_labels(net, pd.ds, std::vector<std::uint32_t>{999}), DataError);
}

TEST_CASE("image loss names") {
  CHECK(image_loss_name(ImageVariant::full) == "scalable_margin_asymmetric");
  CHECK(image_loss_name(ImageVariant::sym) == "scalable_margin_symmetric");
  CHECK(image_loss_name(ImageVariant::mars) == "fixed_margin_asymmetric");
  CHECK(image_loss_name(ImageVariant::cos) == "log_map_pairwise");
}

TEST_CASE("pipeline writes artifacts and a manifest") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = tmp.path / "runs";

  const std::vector<PipelineResult> results = run_pipeline(cfg);
  REQUIRE(results.size() == 1);
  const PipelineResult& res = results[0];
  const auto run_dir = cfg.out_dir / "seed_5";
  CHECK(res.run_dir == run_dir);
  CHECK(res.seed == 5);
  CHECK(res.map >= 0.0);
  CHECK(res.map <= 1.0);
  CHECK(res.evaluated_queries + res.skipped_queries == 9);
  CHECK(res.dictionary_size == 3);

  for (const char* name : {"manifest.json", "split.csv", "semantic.ckpt", "dictionary.csv",
                           "image.ckpt", "metrics/pr_curve.csv", "metrics/topk_precision.csv",
                           "metrics/map_summary.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(run_dir / name));
  }

  const nlohmann::json manifest = read_json(run_dir / "manifest.json");
  CHECK(manifest.at("schema_version") == 1);
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("derived_seeds").at("data") == 5);
  CHECK(manifest.at("derived_seeds").at("split") == 6);
  CHECK(manifest.at("derived_seeds").at("semantic") == 7);
  CHECK(manifest.at("derived_seeds").at("image") == 8);
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("image_loss") == "scalable_margin_asymmetric");
  CHECK(manifest.at("dataset").at("items") == 36);
  CHECK(manifest.at("split").at("query") == 9);
  CHECK(manifest.at("dictionary_size") == 3);
  CHECK(manifest.at("metrics").at("map") == doctest::Approx(res.map));
  const std::vector<std::string> stages = manifest.at("stages");
  CHECK(stages == std::vector<std::string>{"prepare_data", "train_semantic",
                                           "build_dictionaries", "train_image", "encode",
                                           "evaluate", "write_metrics"});
  CHECK(manifest.at("config").at("model.code_bits") == "8");

  const nlohmann::json summary = read_json(run_dir / "metrics" / "map_summary.json");
  CHECK(summary.at("map") == doctest::Approx(res.map));
  CHECK(summary.at("config").at("run.seed") == "5");
  CHECK(summary.at("config").at("run.image_loss") == "scalable_margin_asymmetric");
}

TEST_CASE("pipeline reruns are byte-identical") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = tmp.path / "runs";

  const std::vector<const char*> tracked{"manifest.json", "split.csv", "dictionary.csv",
                                         "metrics/pr_curve.csv", "metrics/topk_precision.csv",
                                         "metrics/map_summary.json"};
  run_pipeline(cfg);
  const auto run_dir = cfg.out_dir / "seed_5";
  std::vector<std::string> first;
  for (const char* name : tracked) first.push_back(slurp(run_dir / name));

  run_pipeline(cfg);
  for (std::size_t i = 0; i < tracked.size(); ++i) {
    CAPTURE(tracked[i]);
    CHECK(slurp(run_dir / tracked[i]) == first[i]);
  }
}

TEST_CASE("pipeline failure records the failing stage") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = tmp.path / "runs";
  cfg.cutoff = 999999;  // larger than any database this config can build

  CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);

  const auto run_dir = cfg.out_dir / "seed_5";
  const nlohmann::json manifest = read_json(run_dir / "manifest.json");
  CHECK(manifest.at("status") == "failed");
  CHECK(manifest.at("failed_stage") == "evaluate");
  CHECK(!manifest.at("error").get<std::string>().empty());
  const std::vector<std::string> stages = manifest.at("stages");
  CHECK(std::find(stages.begin(), stages.end(), "encode") != stages.end());
  CHECK(std::find(stages.begin(), stages.end(), "evaluate") == stages.end());
  CHECK(std::filesystem::exists(run_dir / "semantic.ckpt"));
  CHECK(std::filesystem::exists(run_dir / "image.ckpt"));
}

TEST_CASE("ablation suite covers every variant") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = tmp.path / "ablation";

  const std::vector<AblationRow> rows = run_ablation_suite(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].variant == ImageVariant::full);
  CHECK(rows[1].variant == ImageVariant::sym);
  CHECK(rows[2].variant == ImageVariant::mars);
  CHECK(rows[3].variant == ImageVariant::cos);
  for (const AblationRow& row : rows) {
    CAPTURE(to_string(row.variant));
    REQUIRE(row.per_seed.size() == 1);
    CHECK(row.mean_map == doctest::Approx(row.per_seed[0]));
    CHECK(row.mean_map >= 0.0);
    CHECK(row.mean_map <= 1.0);
    CHECK(std::filesystem::exists(cfg.out_dir / to_string(row.variant) / "seed_5" /
                                  "manifest.json"));
  }

  const nlohmann::json cos_manifest = read_json(cfg.out_dir / "cos" / "seed_5" / "manifest.json");
  CHECK(cos_manifest.at("image_loss") == "log_map_pairwise");

  const std::string csv = slurp(cfg.out_dir / "ablation.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "variant,mean_map,map_seed_5");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("margin sweep rows and csv") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = tmp.path / "sweep";

  const std::vector<double> margins{0.0, 0.25};
  const std::vector<MarginSweepRow> rows = run_margin_sweep(cfg, margins);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].margin == doctest::Approx(0.0));
  CHECK(rows[1].margin == doctest::Approx(0.25));
  for (const MarginSweepRow& row : rows) {
    CHECK(row.map_semantic >= 0.0);
    CHECK(row.map_semantic <= 1.0);
    CHECK(row.map_image >= 0.0);
    CHECK(row.map_image <= 1.0);
  }

  const std::string csv = slurp(cfg.out_dir / "margin_sweep.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "margin,map_semantic,map_image");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  CHECK_THROWS_AS(run_margin_sweep(cfg, std::vector<double>{-0.1}), ConfigError);
  CHECK_THROWS_AS(run_margin_sweep(cfg, std::vector<double>{1.5}), ConfigError);
}

TEST_CASE("pipeline consumes a saved dataset directory") {
  TempDir tmp;
  const MultiLabelDataset ds = generate_synthetic(12, 3, 8, 0.0, 0.2, 41);
  const auto data_dir = tmp.path / "data";
  std::filesystem::create_directories(data_dir);
  save_dataset(ds, data_dir);

  ExperimentConfig cfg = tiny_config();
  cfg.data_dir = data_dir;
  const PreparedData pd = prepare_data(cfg, 5);
  CHECK(pd.ds.features == ds.features);
  CHECK(pd.ds.labels == ds.labels);

  cfg.out_dir = tmp.path / "runs";
  const std::vector<PipelineResult> results = run_pipeline(cfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].evaluated_queries + results[0].skipped_queries == 9);
}
