#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mionset/cwt.hpp"
#include "mionset/detector.hpp"
#include "mionset/filters.hpp"
#include "mionset/metrics.hpp"
#include "mionset/pca.hpp"
#include "mionset/predictor.hpp"
#include "mionset/synth.hpp"

namespace mionset {

// How the continuous test stream is assembled from the synthetic corpus.
struct StreamConfig {
  double mi_train_fraction = 0.7;  // MI trials kept for training; the rest feed the stream
  double min_rest_s = 16.0;
  double max_rest_s = 22.0;
  std::uint64_t rng_seed = 7;
};

struct DetectorSettings {
  int neighbor_votes = 2;  // N_s
  std::string tuning_mode = "percentile";
  double percentile_alpha = 0.05;
  int folds = 5;
};

struct PipelineConfig {
  double sample_rate_hz = 100.0;
  BandpassSpec bandpass;
  double pca_retention = 0.70;
  int q = 6;
  int v = 64;
  double input_len_s = 0.5;
  double output_len_s = 0.5;
  double hop_s = -1.0;  // < 0: use output_len_s
  TrainConfig train;
  DetectorSettings detector;
  StreamConfig stream;
  SynthConfig synth;

  // Sample counts derived once at parse/validate time (nearest integer;
  // rejected if rounding moves the value by more than 1%).
  int input_len() const;
  int output_len() const;
  int hop() const;
  void validate() const;
};

// Strict parser: unknown keys are errors; an empty file yields the defaults.
PipelineConfig parse_config_file(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);

// Trained artifact directory: bundle.json (config echo, PCA, CWT, codebook,
// optional threshold) plus one ed_<pair>.f32 weight file per channel-scale
// pair (row-major float32; per cell wx, wh, b with gate blocks i,f,g,o;
// encoder, decoder, then dense W and b).
struct ModelBundle {
  PipelineConfig config;
  PcaModel pca;
  CwtSpec cwt;
  Codebook codebook;
  std::vector<EdModel> bank;
  std::optional<double> threshold;
};

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

// Pipeline stages. Every stage reads its inputs from disk and writes its
// outputs atomically, so chained and individually invoked runs are
// byte-identical. Directory layout under a workspace root:
//   data/    synthetic trials + manifest.json
//   prep/    preprocess.json, train/rest window tensors, stream + series
//   bundle/  model bundle
//   decisions.csv, report_raw.{json,csv}, report_corrected.{json,csv}
void run_synth(const PipelineConfig& cfg, const std::filesystem::path& data_dir);
void run_preprocess(const PipelineConfig& cfg, const std::filesystem::path& data_dir,
                    const std::filesystem::path& prep_dir);
void run_train(const PipelineConfig& cfg, const std::filesystem::path& prep_dir,
               const std::filesystem::path& bundle_dir, int workers);
double run_tune(const PipelineConfig& cfg, const std::filesystem::path& prep_dir,
                const std::filesystem::path& bundle_dir, int workers);
std::vector<SegmentDecision> run_detect(const std::filesystem::path& prep_dir,
                                        const std::filesystem::path& bundle_dir,
                                        const std::filesystem::path& decisions_csv);

struct EvalPair {
  EvalReport raw;        // before correction (neighbor_votes echoed as 0)
  EvalReport corrected;  // after majority correction
};
EvalPair run_evaluate(const std::filesystem::path& prep_dir, const std::filesystem::path& bundle_dir,
                      const std::filesystem::path& decisions_csv, const std::filesystem::path& report_dir);

EvalPair run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& root, int workers);

// Grid runs over hidden sizes and decoder lengths; each combination gets its
// own subdirectory under root/sweep and one row pair in root/sweep.csv.
struct SweepRow {
  double output_len_s = 0.0;
  int hidden_size = 0;
  EvalPair eval;
};
std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const std::vector<int>& hidden_sizes,
                                const std::vector<double>& output_lens,
                                const std::filesystem::path& root, int workers);

}  // namespace mionset
