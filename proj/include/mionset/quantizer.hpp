#pragma once

#include <Eigen/Dense>

#include "mionset/cwt.hpp"

namespace mionset {

// Uniform quantizer: one [lo, hi] range per (channel, scale) pair, a shared
// level count v. Out-of-range values clamp to the end levels.
struct Codebook {
  int v = 64;
  int channels = 0;
  int scales = 0;
  Eigen::MatrixXd lo;  // [channels x scales]
  Eigen::MatrixXd hi;

  void validate() const;
};

// lo/hi = min/max over the training windows (inputs and targets) of each
// (channel, scale) pair.
Codebook fit_codebook(const WindowPair& train, int v);

int quantize(double x, int channel, int scale, const Codebook& cb);
double dequantize(int level, int channel, int scale, const Codebook& cb);
Eigen::VectorXd one_hot(int level, int v);

// Level matrix for one (channel, scale) pair, shaped [window_len x n_windows]
// so each column is one window (the batch layout the predictors consume).
Eigen::MatrixXi quantize_windows(const WindowTensor& wt, int channel, int scale, const Codebook& cb);

// Level series over time for one pair of a continuous stream.
Eigen::VectorXi quantize_series(const SeriesTensor& series, int channel, int scale, const Codebook& cb);

}  // namespace mionset
