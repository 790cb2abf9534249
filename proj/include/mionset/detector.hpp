#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mionset/predictor.hpp"

namespace mionset {

struct DetectorConfig {
  double s_th = 0.0;
  int input_len = 0;
  int output_len = 0;
  int hop = 0;             // 0 means "use output_len"
  int neighbor_votes = 2;  // N_s, even: votes split across preceding/following segments

  int effective_hop() const { return hop > 0 ? hop : output_len; }
  void validate() const;
};

struct SegmentDecision {
  std::int64_t segment_index = 0;
  std::int64_t start_sample = 0;
  double similarity = 0.0;
  std::string raw_label;
  std::string corrected_label;
  std::int64_t raw_available_at_sample = -1;       // start + output_len
  std::int64_t decision_available_at_sample = -1;  // + (N_s/2)*hop lookahead
};

// Mean over streams and samples of 1 - |a-b|/(|a|+|b|), with the 0/0 term
// defined as 1. Both matrices are [output_len x p].
double similarity(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& received);

// Slides over the preprocessed stream: for each segment start t (= input_len,
// input_len+hop, ...) every predictor extrapolates the quantized history
// [t-input_len, t) and the prediction is scored against the received samples
// [t, t+output_len), both sides dequantized through the codebook. Labels are
// thresholded at s_th, then majority-corrected.
std::vector<SegmentDecision> detect_stream(const SeriesTensor& series, const std::vector<EdModel>& bank,
                                           const Codebook& cb, const DetectorConfig& cfg);

// Single-pass majority vote over {i - N_s/2, ..., i + N_s/2} of the input
// labels, truncated at the boundaries; exact ties keep the original label.
std::vector<std::string> error_correct(const std::vector<std::string>& labels, int neighbor_votes);

enum class TuningMode { percentile, f1 };

// Pure threshold selection given similarity pools. Percentile mode returns the
// alpha-quantile (linear interpolation) of the MI similarities; f1 mode scans
// a 0.001-step grid and returns the lowest argmax threshold.
double threshold_from_similarities(const std::vector<double>& mi_sims,
                                   const std::vector<double>& rest_sims, TuningMode mode, double alpha);

struct TuneResult {
  double s_th = 0.0;
  std::vector<double> mi_similarities;    // pooled held-out similarities
  std::vector<double> rest_similarities;  // f1 mode only
};

// K-fold cross-validated threshold: per fold, retrain the bank on the other
// folds (fold seeds derived from cfg.rng_seed) and score the held-out MI
// windows; the pooled similarities feed threshold_from_similarities. In f1
// mode every fold bank also scores the supplied rest windows.
TuneResult tune_threshold(const BankDataset& train_windows, const Codebook& cb, const TrainConfig& cfg,
                          TuningMode mode, int folds, double alpha,
                          const BankDataset* rest_windows = nullptr, int n_workers = 1);

void write_decisions_csv(const std::filesystem::path& path, const std::vector<SegmentDecision>& decisions);
std::vector<SegmentDecision> load_decisions_csv(const std::filesystem::path& path);

}  // namespace mionset
