#pragma once

#include <cstdint>
#include <vector>

#include "mionset/recording.hpp"

namespace mionset {

struct CwtSpec {
  int q = 6;              // number of scales
  double omega0 = 6.0;    // Morlet center parameter
  std::vector<double> scale_center_freqs_hz;

  // q center frequencies geometrically spaced across [low_hz, high_hz].
  static CwtSpec geometric(int q, double low_hz, double high_hz, double omega0 = 6.0);
  void validate(double low_hz, double high_hz) const;
};

// Dense [time x channels x scales] array of per-scale series, stored
// time-major: index(t, c, s) = (t*channels + c)*scales + s.
struct SeriesTensor {
  std::int64_t time = 0;
  int channels = 0;
  int scales = 0;
  std::vector<double> data;

  double& at(std::int64_t t, int c, int s) {
    return data[static_cast<size_t>((t * channels + c) * scales + s)];
  }
  double at(std::int64_t t, int c, int s) const {
    return data[static_cast<size_t>((t * channels + c) * scales + s)];
  }
};

// Per channel and scale: the real part of the correlation with the
// L1-normalized Morlet at that scale (cosine-phase kernel, so convolution and
// correlation coincide). Zero padding beyond the edges; output length equals
// input length.
SeriesTensor cwt_decompose(const Recording& rec, const CwtSpec& spec);

// Windowed view used for training and detection: [n_windows x window_len x
// channels x scales], plus the sample index each window starts at.
struct WindowTensor {
  std::int64_t n_windows = 0;
  int window_len = 0;
  int channels = 0;
  int scales = 0;
  std::vector<double> data;
  std::vector<std::int64_t> origins;

  double& at(std::int64_t w, int t, int c, int s) {
    return data[static_cast<size_t>(((w * window_len + t) * channels + c) * scales + s)];
  }
  double at(std::int64_t w, int t, int c, int s) const {
    return data[static_cast<size_t>(((w * window_len + t) * channels + c) * scales + s)];
  }
};

struct WindowPair {
  WindowTensor inputs;   // [N x input_len x channels x scales]
  WindowTensor targets;  // [N x output_len x channels x scales]
};

// Window k: input rows [k*hop, k*hop+input_len), target rows immediately
// following. N = floor((time - input_len - output_len)/hop) + 1.
WindowPair make_windows(const SeriesTensor& series, int input_len, int output_len, int hop);

}  // namespace mionset
