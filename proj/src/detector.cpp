#include "mionset/detector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mionset/common.hpp"

namespace mionset {

void DetectorConfig::validate() const {
  if (!(s_th >= 0.0) || !(s_th <= 1.0)) throw std::runtime_error("detector: s_th must lie in [0, 1]");
  if (input_len < 1 || output_len < 1) throw std::runtime_error("detector: window lengths must be >= 1");
  if (hop < 0) throw std::runtime_error("detector: hop must be >= 0");
  if (neighbor_votes < 0 || neighbor_votes % 2 != 0) {
    throw std::runtime_error("detector: neighbor_votes must be even and >= 0");
  }
}

double similarity(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& received) {
  if (predicted.rows() != received.rows() || predicted.cols() != received.cols()) {
    throw std::runtime_error("similarity: shape mismatch");
  }
  if (predicted.size() == 0) throw std::runtime_error("similarity: empty input");
  if (!predicted.allFinite() || !received.allFinite()) {
    throw std::runtime_error("similarity: non-finite value");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < predicted.cols(); ++j) {
    for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
      const double a = predicted(i, j);
      const double b = received(i, j);
      const double denom = std::abs(a) + std::abs(b);
      acc += denom == 0.0 ? 1.0 : 1.0 - std::abs(a - b) / denom;
    }
  }
  return acc / static_cast<double>(predicted.size());
}

std::vector<std::string> error_correct(const std::vector<std::string>& labels, int neighbor_votes) {
  if (neighbor_votes < 0 || neighbor_votes % 2 != 0) {
    throw std::runtime_error("error_correct: neighbor_votes must be even and >= 0");
  }
  const int half = neighbor_votes / 2;
  const std::int64_t n = static_cast<std::int64_t>(labels.size());
  std::vector<std::string> out(labels.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - half);
    const std::int64_t hi = std::min<std::int64_t>(n - 1, i + half);
    int mi = 0, rest = 0;
    for (std::int64_t j = lo; j <= hi; ++j) {
      if (labels[static_cast<size_t>(j)] == kLabelMi) {
        ++mi;
      } else {
        ++rest;
      }
    }
    if (mi > rest) {
      out[static_cast<size_t>(i)] = kLabelMi;
    } else if (rest > mi) {
      out[static_cast<size_t>(i)] = kLabelRest;
    } else {
      out[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)];
    }
  }
  return out;
}

std::vector<SegmentDecision> detect_stream(const SeriesTensor& series, const std::vector<EdModel>& bank,
                                           const Codebook& cb, const DetectorConfig& cfg) {
  cfg.validate();
  cb.validate();
  if (series.channels != cb.channels || series.scales != cb.scales) {
    throw std::runtime_error("detect: codebook and series disagree on the pair grid");
  }
  const int n_pairs = cb.channels * cb.scales;
  if (static_cast<int>(bank.size()) != n_pairs) {
    throw std::runtime_error(strfmt("detect: bank has %zu models for %d pairs", bank.size(), n_pairs));
  }
  const int li = cfg.input_len;
  const int lo = cfg.output_len;
  const int hop = cfg.effective_hop();
  if (series.time < li + lo) {
    throw std::runtime_error(strfmt("detect: stream has %lld samples; one decision needs %d",
                                    static_cast<long long>(series.time), li + lo));
  }
  const std::int64_t n_seg = (series.time - li - lo) / hop + 1;

  // One dequantized [output_len x n_seg] block per pair for each side.
  std::vector<Eigen::MatrixXd> predicted(static_cast<size_t>(n_pairs));
  std::vector<Eigen::MatrixXd> received(static_cast<size_t>(n_pairs));
  for (int c = 0; c < cb.channels; ++c) {
    for (int s = 0; s < cb.scales; ++s) {
      const int pair = c * cb.scales + s;
      const EdModel& model = bank[static_cast<size_t>(pair)];
      model.validate();
      if (model.input_len != li || model.output_len != lo || model.v != cb.v) {
        throw std::runtime_error(strfmt("detect: model %d disagrees with detector config", pair));
      }
      Eigen::VectorXi levels = quantize_series(series, c, s, cb);
      Eigen::MatrixXi inputs(li, n_seg);
      for (std::int64_t k = 0; k < n_seg; ++k) {
        const std::int64_t start = li + k * hop;
        inputs.col(k) = levels.segment(start - li, li);
      }
      BatchPrediction pred = predict_batch(model, inputs);
      Eigen::MatrixXd& pd = predicted[static_cast<size_t>(pair)];
      Eigen::MatrixXd& rd = received[static_cast<size_t>(pair)];
      pd.resize(lo, n_seg);
      rd.resize(lo, n_seg);
      for (std::int64_t k = 0; k < n_seg; ++k) {
        const std::int64_t start = li + k * hop;
        for (int t = 0; t < lo; ++t) {
          pd(t, k) = dequantize(pred.levels(t, k), c, s, cb);
          rd(t, k) = dequantize(levels[start + t], c, s, cb);
        }
      }
    }
  }

  std::vector<SegmentDecision> decisions(static_cast<size_t>(n_seg));
  std::vector<std::string> raw_labels(static_cast<size_t>(n_seg));
  Eigen::MatrixXd pred_seg(lo, n_pairs);
  Eigen::MatrixXd recv_seg(lo, n_pairs);
  for (std::int64_t k = 0; k < n_seg; ++k) {
    for (int pair = 0; pair < n_pairs; ++pair) {
      pred_seg.col(pair) = predicted[static_cast<size_t>(pair)].col(k);
      recv_seg.col(pair) = received[static_cast<size_t>(pair)].col(k);
    }
    SegmentDecision& d = decisions[static_cast<size_t>(k)];
    d.segment_index = k;
    d.start_sample = li + k * hop;
    d.similarity = similarity(pred_seg, recv_seg);
    d.raw_label = d.similarity >= cfg.s_th ? kLabelMi : kLabelRest;
    d.raw_available_at_sample = d.start_sample + lo;
    d.decision_available_at_sample = d.start_sample + lo +
                                     static_cast<std::int64_t>(cfg.neighbor_votes / 2) * hop;
    raw_labels[static_cast<size_t>(k)] = d.raw_label;
  }
  std::vector<std::string> corrected = error_correct(raw_labels, cfg.neighbor_votes);
  for (std::int64_t k = 0; k < n_seg; ++k) {
    decisions[static_cast<size_t>(k)].corrected_label = corrected[static_cast<size_t>(k)];
  }
  return decisions;
}

double threshold_from_similarities(const std::vector<double>& mi_sims,
                                   const std::vector<double>& rest_sims, TuningMode mode, double alpha) {
  if (mi_sims.empty()) throw std::runtime_error("tune: no MI similarities");
  if (mode == TuningMode::percentile) {
    if (!(alpha >= 0.0) || !(alpha <= 1.0)) throw std::runtime_error("tune: alpha must lie in [0, 1]");
    std::vector<double> sorted = mi_sims;
    std::sort(sorted.begin(), sorted.end());
    const double pos = alpha * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  }

  if (rest_sims.empty()) throw std::runtime_error("tune: f1 mode requires rest similarities");
  double best_f1 = -1.0;
  double best_th = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double th = k / 1000.0;
    std::int64_t tp = 0, fn = 0, fp = 0;
    for (double s : mi_sims) {
      if (s >= th) {
        ++tp;
      } else {
        ++fn;
      }
    }
    for (double s : rest_sims) {
      if (s >= th) ++fp;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    const double f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_th = th;
    }
  }
  return best_th;
}

namespace {

SequenceDataset subset(const SequenceDataset& ds, const std::vector<int>& idx) {
  SequenceDataset out;
  out.v = ds.v;
  out.inputs.resize(ds.inputs.rows(), static_cast<Eigen::Index>(idx.size()));
  out.targets.resize(ds.targets.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) {
    out.inputs.col(static_cast<Eigen::Index>(j)) = ds.inputs.col(idx[j]);
    out.targets.col(static_cast<Eigen::Index>(j)) = ds.targets.col(idx[j]);
  }
  return out;
}

// Similarity of each window in `ds` under the given bank: every pair's model
// extrapolates the window's input levels; predictions and targets are
// dequantized and folded into one Eq.-style mean per window.
std::vector<double> window_similarities(const std::vector<EdModel>& bank, const BankDataset& ds,
                                        const Codebook& cb) {
  const int n_pairs = cb.channels * cb.scales;
  const Eigen::Index n_win = ds.pairs.front().inputs.cols();
  const int lo = static_cast<int>(ds.pairs.front().targets.rows());
  std::vector<Eigen::MatrixXd> predicted(static_cast<size_t>(n_pairs));
  std::vector<Eigen::MatrixXd> received(static_cast<size_t>(n_pairs));
  for (int c = 0; c < cb.channels; ++c) {
    for (int s = 0; s < cb.scales; ++s) {
      const int pair = c * cb.scales + s;
      const SequenceDataset& pd = ds.pairs[static_cast<size_t>(pair)];
      BatchPrediction pred = predict_batch(bank[static_cast<size_t>(pair)], pd.inputs);
      Eigen::MatrixXd& pm = predicted[static_cast<size_t>(pair)];
      Eigen::MatrixXd& rm = received[static_cast<size_t>(pair)];
      pm.resize(lo, n_win);
      rm.resize(lo, n_win);
      for (Eigen::Index w = 0; w < n_win; ++w) {
        for (int t = 0; t < lo; ++t) {
          pm(t, w) = dequantize(pred.levels(t, w), c, s, cb);
          rm(t, w) = dequantize(pd.targets(t, w), c, s, cb);
        }
      }
    }
  }
  std::vector<double> sims(static_cast<size_t>(n_win));
  Eigen::MatrixXd pred_seg(lo, n_pairs);
  Eigen::MatrixXd recv_seg(lo, n_pairs);
  for (Eigen::Index w = 0; w < n_win; ++w) {
    for (int pair = 0; pair < n_pairs; ++pair) {
      pred_seg.col(pair) = predicted[static_cast<size_t>(pair)].col(w);
      recv_seg.col(pair) = received[static_cast<size_t>(pair)].col(w);
    }
    sims[static_cast<size_t>(w)] = similarity(pred_seg, recv_seg);
  }
  return sims;
}

}  // namespace

TuneResult tune_threshold(const BankDataset& train_windows, const Codebook& cb, const TrainConfig& cfg,
                          TuningMode mode, int folds, double alpha, const BankDataset* rest_windows,
                          int n_workers) {
  if (train_windows.pairs.empty()) throw std::runtime_error("tune: empty training set");
  const int n = static_cast<int>(train_windows.pairs.front().inputs.cols());
  if (folds < 2) throw std::runtime_error("tune: folds must be >= 2");
  if (folds > n) {
    throw std::runtime_error(strfmt("tune: %d folds but only %d windows", folds, n));
  }
  if (mode == TuningMode::f1 && rest_windows == nullptr) {
    throw std::runtime_error("tune: f1 mode requires rest windows");
  }

  TuneResult result;
  for (int fold = 0; fold < folds; ++fold) {
    std::vector<int> train_idx, held_idx;
    for (int w = 0; w < n; ++w) {
      (w % folds == fold ? held_idx : train_idx).push_back(w);
    }
    BankDataset fold_train;
    fold_train.channels = train_windows.channels;
    fold_train.scales = train_windows.scales;
    fold_train.v = train_windows.v;
    BankDataset fold_held = fold_train;
    for (const SequenceDataset& ds : train_windows.pairs) {
      fold_train.pairs.push_back(subset(ds, train_idx));
      fold_held.pairs.push_back(subset(ds, held_idx));
    }
    TrainConfig fold_cfg = cfg;
    fold_cfg.rng_seed = mix_seed(cfg.rng_seed, 100 + static_cast<std::uint64_t>(fold));
    std::vector<EdModel> fold_bank = train_bank(fold_train, fold_cfg, n_workers);

    std::vector<double> sims = window_similarities(fold_bank, fold_held, cb);
    result.mi_similarities.insert(result.mi_similarities.end(), sims.begin(), sims.end());
    if (mode == TuningMode::f1) {
      std::vector<double> rest_sims = window_similarities(fold_bank, *rest_windows, cb);
      result.rest_similarities.insert(result.rest_similarities.end(), rest_sims.begin(), rest_sims.end());
    }
  }
  result.s_th = threshold_from_similarities(result.mi_similarities, result.rest_similarities, mode, alpha);
  return result;
}

void write_decisions_csv(const std::filesystem::path& path, const std::vector<SegmentDecision>& decisions) {
  std::string out = "segment_index,start_sample,similarity,raw_label,corrected_label,decision_available_at_sample\n";
  for (const SegmentDecision& d : decisions) {
    out += strfmt("%lld,%lld,%.6f,%s,%s,%lld\n", static_cast<long long>(d.segment_index),
                  static_cast<long long>(d.start_sample), d.similarity, d.raw_label.c_str(),
                  d.corrected_label.c_str(), static_cast<long long>(d.decision_available_at_sample));
  }
  write_file_atomic(path, out);
}

std::vector<SegmentDecision> load_decisions_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(strfmt("%s: empty file", path.string().c_str()));
  std::vector<SegmentDecision> decisions;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw std::runtime_error(strfmt("%s:%zu: expected 6 fields", path.string().c_str(), line_no));
    }
    SegmentDecision d;
    d.segment_index = std::stoll(fields[0]);
    d.start_sample = std::stoll(fields[1]);
    d.similarity = std::stod(fields[2]);
    d.raw_label = fields[3];
    d.corrected_label = fields[4];
    d.decision_available_at_sample = std::stoll(fields[5]);
    if (d.raw_label != kLabelMi && d.raw_label != kLabelRest) {
      throw std::runtime_error(strfmt("%s:%zu: bad raw label '%s'", path.string().c_str(), line_no,
                                      d.raw_label.c_str()));
    }
    if (d.corrected_label != kLabelMi && d.corrected_label != kLabelRest) {
      throw std::runtime_error(strfmt("%s:%zu: bad corrected label '%s'", path.string().c_str(), line_no,
                                      d.corrected_label.c_str()));
    }
    decisions.push_back(std::move(d));
  }
  return decisions;
}

}  // namespace mionset
