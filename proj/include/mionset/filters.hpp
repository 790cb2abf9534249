#pragma once

#include <complex>
#include <vector>

#include "mionset/recording.hpp"

namespace mionset {

struct BandpassSpec {
  double low_hz = 6.0;
  double high_hz = 13.0;
  int order = 4;  // analog prototype order; the bandpass cascade has `order` biquads

  void validate(double sample_rate_hz) const;
};

// One second-order section, normalized so a0 = 1:
//   y[t] = b0 x[t] + b1 x[t-1] + b2 x[t-2] - a1 y[t-1] - a2 y[t-2]
struct Biquad {
  double b0 = 0, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct BiquadCascade {
  std::vector<Biquad> stages;

  // Complex gain at freq_hz for the given sampling rate, evaluated from the
  // emitted coefficients.
  std::complex<double> response(double freq_hz, double sample_rate_hz) const;
  double gain_db(double freq_hz, double sample_rate_hz) const;
};

// Butterworth bandpass via the analog prototype: lowpass poles, prewarped
// lowpass-to-bandpass transform, bilinear mapping, conjugate poles paired per
// section. Throws if any resulting pole lands on or outside the unit circle.
BiquadCascade design_bandpass(const BandpassSpec& spec, double sample_rate_hz);

// Reference response of the same design evaluated in pole-zero form (used to
// cross-check the cascade coefficients).
std::complex<double> designed_bandpass_response(const BandpassSpec& spec, double sample_rate_hz,
                                                double freq_hz);

// Causal single-pass filtering per channel, zero initial state.
void filter_inplace(const BiquadCascade& cascade, Eigen::VectorXd& x);
Recording bandpass_filter(const Recording& rec, const BandpassSpec& spec);

// Surface Laplacian re-reference: each channel with a non-empty neighbor list
// becomes itself minus the mean of its neighbors; others pass through.
Recording laplacian_filter(const Recording& rec);

}  // namespace mionset
