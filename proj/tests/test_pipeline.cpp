#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mionset/common.hpp"
#include "mionset/pipeline.hpp"

using namespace mionset;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.json";
  write_file_atomic(path, text);
  return path;
}

// Small but fully functional pipeline setup: 4-channel corpus, 3 s trials,
// tiny predictors. Keeps the end-to-end cases around a second.
PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.sample_rate_hz = 50.0;
  cfg.q = 3;
  cfg.v = 8;
  cfg.input_len_s = 0.3;
  cfg.output_len_s = 0.3;
  cfg.train.epochs = 3;
  cfg.train.hidden_size = 8;
  cfg.train.batch_size = 16;
  cfg.train.rng_seed = 5;
  cfg.detector.folds = 2;
  cfg.stream.min_rest_s = 1.0;
  cfg.stream.max_rest_s = 2.0;
  cfg.stream.rng_seed = 11;
  cfg.synth.n_channels = 4;
  cfg.synth.sample_rate_hz = cfg.sample_rate_hz;
  cfg.synth.trial_duration_s = 3.0;
  cfg.synth.n_mi_trials = 6;
  cfg.synth.n_rest_trials = 3;
  cfg.synth.rng_seed = 21;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("an empty config file yields the documented defaults") {
  const fs::path dir = fresh_dir("mionset_cfg_defaults");
  const PipelineConfig cfg = parse_config_file(write_config(dir, ""));
  CHECK(cfg.sample_rate_hz == 100.0);
  CHECK(cfg.bandpass.low_hz == 6.0);
  CHECK(cfg.bandpass.high_hz == 13.0);
  CHECK(cfg.bandpass.order == 4);
  CHECK(cfg.pca_retention == 0.70);
  CHECK(cfg.q == 6);
  CHECK(cfg.v == 64);
  CHECK(cfg.input_len() == 50);
  CHECK(cfg.output_len() == 50);
  CHECK(cfg.hop() == 50);
  CHECK(cfg.train.epochs == 50);
  CHECK(cfg.train.l1_lambda == 0.001);
  CHECK(cfg.train.hidden_size == 90);
  CHECK(cfg.train.learning_rate == 1e-3);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.teacher_forcing);
  CHECK(cfg.detector.neighbor_votes == 2);
  CHECK(cfg.detector.tuning_mode == "percentile");
  CHECK(cfg.detector.percentile_alpha == 0.05);
  CHECK(cfg.detector.folds == 5);
}

TEST_CASE("config values parse into derived sample counts") {
  const fs::path dir = fresh_dir("mionset_cfg_values");
  const PipelineConfig cfg = parse_config_file(write_config(dir, R"({
    "sample_rate_hz": 100.0,
    "input_len_s": 0.5,
    "output_len_s": 0.25,
    "train": {"lambda": 0.01, "hidden_size": 30},
    "detector": {"tuning_mode": "f1"}
  })"));
  CHECK(cfg.input_len() == 50);
  CHECK(cfg.output_len() == 25);
  CHECK(cfg.hop() == 25);  // hop defaults to the decoder length
  CHECK(cfg.train.l1_lambda == 0.01);
  CHECK(cfg.train.hidden_size == 30);
  CHECK(cfg.detector.tuning_mode == "f1");
  // Untouched blocks keep their defaults.
  CHECK(cfg.v == 64);
  CHECK(cfg.synth.n_channels == 8);
}

TEST_CASE("unknown keys are rejected with their full path") {
  const fs::path dir = fresh_dir("mionset_cfg_unknown");
  CHECK_THROWS_WITH_AS(parse_config_file(write_config(dir, R"({"fooo": 1})")),
                       doctest::Contains("unknown config key 'fooo'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config_file(write_config(dir, R"({"train": {"momentum": 0.9}})")),
                       doctest::Contains("unknown config key 'train.momentum'"), std::runtime_error);
}

TEST_CASE("window lengths must land within one percent of a sample count") {
  const fs::path dir = fresh_dir("mionset_cfg_rounding");
  // 0.333 s at 100 Hz is 33.3 samples: rounds to 33, off by 0.9% -> accepted.
  const PipelineConfig ok = parse_config_file(
      write_config(dir, R"({"output_len_s": 0.333})"));
  CHECK(ok.output_len() == 33);
  // 0.335 s is 33.5 samples: rounding moves it by 1.5% -> rejected.
  CHECK_THROWS_AS(parse_config_file(write_config(dir, R"({"output_len_s": 0.335})")),
                  std::runtime_error);
}

TEST_CASE("misordered band edges produce the documented error") {
  const fs::path dir = fresh_dir("mionset_cfg_band");
  CHECK_THROWS_WITH_AS(
      parse_config_file(write_config(dir, R"({"bandpass": {"low_hz": 13.0, "high_hz": 6.0}})")),
      doctest::Contains("bandpass.low_hz must be < high_hz"), std::runtime_error);
}

TEST_CASE("config json echo roundtrips") {
  PipelineConfig cfg = tiny_config();
  cfg.detector.tuning_mode = "f1";
  cfg.train.l1_lambda = 0.042;
  const PipelineConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.sample_rate_hz == cfg.sample_rate_hz);
  CHECK(back.q == cfg.q);
  CHECK(back.v == cfg.v);
  CHECK(back.input_len() == cfg.input_len());
  CHECK(back.hop() == cfg.hop());
  CHECK(back.train.l1_lambda == cfg.train.l1_lambda);
  CHECK(back.train.rng_seed == cfg.train.rng_seed);
  CHECK(back.detector.tuning_mode == cfg.detector.tuning_mode);
  CHECK(back.stream.rng_seed == cfg.stream.rng_seed);
  CHECK(back.synth.n_mi_trials == cfg.synth.n_mi_trials);
}

TEST_CASE("bundle roundtrip preserves every parameter bit") {
  const fs::path dir = fresh_dir("mionset_bundle_rt");
  ModelBundle bundle;
  bundle.config = tiny_config();
  bundle.pca.mean = Eigen::VectorXd::LinSpaced(4, 0.1, 0.4);
  bundle.pca.components = Eigen::MatrixXd::Identity(4, 2);
  bundle.pca.eigenvalues = Eigen::VectorXd::LinSpaced(4, 4.0, 1.0);
  bundle.pca.explained_fraction = 0.8;
  bundle.pca.m_prime = 2;
  bundle.cwt = CwtSpec::geometric(bundle.config.q, 6.0, 13.0);
  bundle.codebook.v = bundle.config.v;
  bundle.codebook.channels = 2;
  bundle.codebook.scales = bundle.config.q;
  bundle.codebook.lo = Eigen::MatrixXd::Constant(2, bundle.config.q, -1.5);
  bundle.codebook.hi = Eigen::MatrixXd::Constant(2, bundle.config.q, 2.5);
  for (int pair = 0; pair < 2 * bundle.config.q; ++pair) {
    bundle.bank.push_back(init_ed_model(bundle.config.v, 8, bundle.config.input_len(),
                                        bundle.config.output_len(), pair, 99 + pair));
  }

  save_bundle(bundle, dir);
  ModelBundle loaded = load_bundle(dir);
  CHECK(loaded.config.v == bundle.config.v);
  CHECK_FALSE(loaded.threshold.has_value());
  CHECK(loaded.pca.mean == bundle.pca.mean);
  CHECK(loaded.pca.components == bundle.pca.components);
  CHECK(loaded.codebook.lo(0, 0) == -1.5);
  REQUIRE(loaded.bank.size() == bundle.bank.size());
  for (size_t i = 0; i < bundle.bank.size(); ++i) {
    const EdModel& a = bundle.bank[i];
    const EdModel& b = loaded.bank[i];
    CHECK(b.pair_id == a.pair_id);
    CHECK(b.encoder.wx.isApprox(a.encoder.wx.cast<float>().cast<double>(), 0.0));
    CHECK(b.decoder.wh.isApprox(a.decoder.wh.cast<float>().cast<double>(), 0.0));
    CHECK(b.dense_b.isApprox(a.dense_b.cast<float>().cast<double>(), 0.0));
  }

  bundle.threshold = 0.4375;
  save_bundle(bundle, dir);
  loaded = load_bundle(dir);
  REQUIRE(loaded.threshold.has_value());
  CHECK(*loaded.threshold == 0.4375);

  // A truncated weight file must not load quietly.
  const fs::path blob = dir / "ed_0.f32";
  const auto size = fs::file_size(blob);
  fs::resize_file(blob, size - 8);
  CHECK_THROWS_AS(load_bundle(dir), std::runtime_error);
}

TEST_CASE("staged pipeline runs end-to-end and matches the chained run") {
  const PipelineConfig cfg = tiny_config();
  const fs::path staged = fresh_dir("mionset_staged");
  const fs::path data = staged / "data", prep = staged / "prep", bdir = staged / "bundle";

  run_synth(cfg, data);
  CHECK(fs::exists(data / "manifest.json"));
  const auto manifest = nlohmann::json::parse(read_file(data / "manifest.json"));
  CHECK(manifest.at("mi").size() == 6);
  CHECK(manifest.at("rest").size() == 3);

  run_preprocess(cfg, data, prep);
  CHECK(fs::exists(prep / "preprocess.json"));
  const auto prep_meta = nlohmann::json::parse(read_file(prep / "preprocess.json"));
  const int m_prime = prep_meta.at("pca").at("m_prime").get<int>();
  CHECK(m_prime >= 1);
  CHECK(prep_meta.at("stream").at("scales").get<int>() == cfg.q);

  run_train(cfg, prep, bdir, 1);
  ModelBundle bundle = load_bundle(bdir);
  CHECK_FALSE(bundle.threshold.has_value());
  CHECK(bundle.bank.size() == static_cast<size_t>(m_prime * cfg.q));

  // Detection before tuning is a contract violation.
  CHECK_THROWS_WITH_AS(run_detect(prep, bdir, staged / "early.csv"),
                       doctest::Contains("threshold not tuned"), std::runtime_error);

  const double s_th = run_tune(cfg, prep, bdir, 1);
  CHECK(s_th >= 0.0);
  CHECK(s_th <= 1.0);
  bundle = load_bundle(bdir);
  REQUIRE(bundle.threshold.has_value());
  CHECK(*bundle.threshold == s_th);

  const auto decisions = run_detect(prep, bdir, staged / "decisions.csv");
  CHECK(decisions.size() >= 10);
  for (size_t k = 1; k < decisions.size(); ++k) {
    CHECK(decisions[k].start_sample == decisions[k - 1].start_sample + cfg.hop());
  }

  const EvalPair eval = run_evaluate(prep, bdir, staged / "decisions.csv", staged);
  const Confusion& c = eval.raw.confusion;
  CHECK(static_cast<size_t>(c.tp + c.tn + c.fp + c.fn) == decisions.size());
  CHECK(fs::exists(staged / "report_raw.json"));
  CHECK(fs::exists(staged / "report_corrected.csv"));
  CHECK(eval.raw.neighbor_votes == 0);
  CHECK(eval.corrected.neighbor_votes == cfg.detector.neighbor_votes);

  // The chained entry point must reproduce the staged bytes exactly.
  const fs::path chained = fresh_dir("mionset_chained");
  run_pipeline(cfg, chained, 1);
  CHECK(read_file(chained / "decisions.csv") == read_file(staged / "decisions.csv"));
  CHECK(read_file(chained / "report_raw.json") == read_file(staged / "report_raw.json"));
  CHECK(read_file(chained / "report_corrected.json") == read_file(staged / "report_corrected.json"));
  CHECK(read_file(chained / "bundle" / "bundle.json") == read_file(bdir / "bundle.json"));
  CHECK(read_file(chained / "bundle" / "ed_0.f32") == read_file(bdir / "ed_0.f32"));
}

TEST_CASE("worker count does not change the trained bundle") {
  const PipelineConfig cfg = tiny_config();
  const fs::path root = fresh_dir("mionset_workers");
  run_synth(cfg, root / "data");
  run_preprocess(cfg, root / "data", root / "prep");
  run_train(cfg, root / "prep", root / "b1", 1);
  run_train(cfg, root / "prep", root / "b3", 3);
  const ModelBundle b1 = load_bundle(root / "b1");
  const ModelBundle b3 = load_bundle(root / "b3");
  REQUIRE(b1.bank.size() == b3.bank.size());
  for (size_t i = 0; i < b1.bank.size(); ++i) {
    CHECK(b1.bank[i].encoder.wx == b3.bank[i].encoder.wx);
    CHECK(b1.bank[i].decoder.wx == b3.bank[i].decoder.wx);
    CHECK(b1.bank[i].dense_w == b3.bank[i].dense_w);
  }
  CHECK(read_file(root / "b1" / "ed_0.f32") == read_file(root / "b3" / "ed_0.f32"));
}
