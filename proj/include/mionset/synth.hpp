#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mionset/recording.hpp"

namespace mionset {

// Parameters of the synthetic corpus: pink-noise background on every channel,
// plus (for task trials) a coherent sinusoidal burst on the first
// ceil(active_channel_fraction * n_channels) channels. The burst amplitude is
// calibrated so its power in the band around mi_burst_freq_hz equals
// mi_amplitude_gain times the expected noise power in that band.
struct SynthConfig {
  int n_channels = 8;
  double sample_rate_hz = 100.0;
  double mi_burst_freq_hz = 10.0;
  double mi_amplitude_gain = 8.0;
  double noise_exponent = 1.0;  // 1/f^alpha spectral slope
  double active_channel_fraction = 0.5;
  double trial_duration_s = 5.0;
  int n_mi_trials = 20;
  int n_rest_trials = 8;
  std::uint64_t rng_seed = 1;

  int trial_samples() const;
  int n_active_channels() const;
  void validate() const;
};

std::pair<std::vector<Recording>, std::vector<Recording>> synth_generate(const SynthConfig& cfg);

// Concatenates the MI trials in order, inserting rest stretches of uniformly
// random duration in [min_rest_s, max_rest_s] before the first trial (coin
// flip) and between consecutive trials. Rest material is taken cyclically from
// rest_trials. Markers partition the output timeline.
Recording compose_continuous(const std::vector<Recording>& mi_trials,
                             const std::vector<Recording>& rest_trials,
                             std::uint64_t rng_seed, double min_rest_s, double max_rest_s);

struct SegmentLabel {
  std::int64_t segment_index = 0;
  std::string label;
};

// Ground-truth label for each interval [starts[k], starts[k]+len): "mi_task"
// iff more than `overlap_rule` of its samples fall inside mi_task markers.
std::vector<std::string> interval_truth_labels(const std::vector<Marker>& markers,
                                               const std::vector<std::int64_t>& starts,
                                               std::int64_t len, double overlap_rule);

std::vector<SegmentLabel> segment_truth(const Recording& rec, std::int64_t segment_len,
                                        std::int64_t hop, double overlap_rule = 0.5);

}  // namespace mionset
