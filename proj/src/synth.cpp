#include "mionset/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mionset/common.hpp"

namespace mionset {

int SynthConfig::trial_samples() const {
  return static_cast<int>(std::llround(trial_duration_s * sample_rate_hz));
}

int SynthConfig::n_active_channels() const {
  return static_cast<int>(std::ceil(active_channel_fraction * n_channels));
}

void SynthConfig::validate() const {
  if (n_channels < 1) throw std::runtime_error("synth: n_channels must be >= 1");
  if (!(sample_rate_hz > 0)) throw std::runtime_error("synth: sample_rate_hz must be positive");
  if (!(mi_burst_freq_hz > 0) || mi_burst_freq_hz >= sample_rate_hz / 2) {
    throw std::runtime_error("synth: mi_burst_freq_hz must lie in (0, sample_rate_hz/2)");
  }
  if (!(mi_amplitude_gain >= 0)) throw std::runtime_error("synth: mi_amplitude_gain must be >= 0");
  if (!(active_channel_fraction > 0) || active_channel_fraction > 1) {
    throw std::runtime_error("synth: active_channel_fraction must lie in (0, 1]");
  }
  if (trial_samples() < 4) throw std::runtime_error("synth: trial_duration_s too short");
  if (n_mi_trials < 1) throw std::runtime_error("synth: n_mi_trials must be >= 1");
  if (n_rest_trials < 0) throw std::runtime_error("synth: n_rest_trials must be >= 0");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct NoiseModel {
  int n = 0;                    // samples per trial
  std::vector<double> amp;      // spectral amplitude per bin k = 1..n/2
  std::vector<double> cos_tab;  // cos(2*pi*m/n)
  std::vector<double> sin_tab;
  double band_power = 0.0;      // expected noise power in the burst band
};

NoiseModel build_noise_model(const SynthConfig& cfg) {
  NoiseModel nm;
  nm.n = cfg.trial_samples();
  const int n_bins = nm.n / 2;
  const double df = cfg.sample_rate_hz / nm.n;
  nm.amp.resize(static_cast<size_t>(n_bins) + 1, 0.0);
  const double f_lo = cfg.mi_burst_freq_hz - 2.0;
  const double f_hi = cfg.mi_burst_freq_hz + 2.0;
  for (int k = 1; k <= n_bins; ++k) {
    double f = k * df;
    nm.amp[static_cast<size_t>(k)] = std::pow(f, -cfg.noise_exponent / 2.0);
    if (f >= f_lo && f <= f_hi) {
      nm.band_power += nm.amp[static_cast<size_t>(k)] * nm.amp[static_cast<size_t>(k)];
    }
  }
  nm.cos_tab.resize(static_cast<size_t>(nm.n));
  nm.sin_tab.resize(static_cast<size_t>(nm.n));
  for (int m = 0; m < nm.n; ++m) {
    nm.cos_tab[static_cast<size_t>(m)] = std::cos(kTwoPi * m / nm.n);
    nm.sin_tab[static_cast<size_t>(m)] = std::sin(kTwoPi * m / nm.n);
  }
  return nm;
}

// Spectral synthesis: each Fourier bin gets an independent complex Gaussian
// weight scaled to the 1/f^alpha envelope. Expected trial variance of bin k is
// amp[k]^2, so band power calibration below is exact in expectation.
void add_pink_noise(const NoiseModel& nm, std::mt19937_64& rng, std::normal_distribution<double>& gauss,
                    Eigen::VectorXd& out) {
  const int n = nm.n;
  const int n_bins = n / 2;
  for (int k = 1; k <= n_bins; ++k) {
    const double a = nm.amp[static_cast<size_t>(k)];
    const double c = a * gauss(rng);
    const double s = a * gauss(rng);
    int idx = 0;
    for (int t = 0; t < n; ++t) {
      out[t] += c * nm.cos_tab[static_cast<size_t>(idx)] + s * nm.sin_tab[static_cast<size_t>(idx)];
      idx += k;
      if (idx >= n) idx -= n;
    }
  }
}

std::vector<std::string> channel_names(int n) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(n));
  for (int c = 0; c < n; ++c) names.push_back(strfmt("ch%d", c));
  return names;
}

Recording make_trial(const SynthConfig& cfg, const NoiseModel& nm, std::mt19937_64& rng,
                     std::normal_distribution<double>& gauss, bool mi) {
  const int n = nm.n;
  const int n_ch = cfg.n_channels;
  double phase = 0.0;
  if (mi) {
    phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  }
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(n, n_ch);
  for (int c = 0; c < n_ch; ++c) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    add_pink_noise(nm, rng, gauss, col);
    data.col(c) = col;
  }
  if (mi && cfg.mi_amplitude_gain > 0) {
    const double amplitude = std::sqrt(2.0 * cfg.mi_amplitude_gain * nm.band_power);
    const double w = kTwoPi * cfg.mi_burst_freq_hz / cfg.sample_rate_hz;
    const int active = cfg.n_active_channels();
    for (int t = 0; t < n; ++t) {
      const double burst = amplitude * std::sin(w * t + phase);
      for (int c = 0; c < active; ++c) data(t, c) += burst;
    }
  }

  Recording rec;
  rec.sample_rate_hz = cfg.sample_rate_hz;
  rec.channels = channel_names(n_ch);
  rec.samples = data.cast<float>();
  rec.markers.push_back(Marker{0, n, mi ? kLabelMi : kLabelRest});
  return rec;
}

}  // namespace

std::pair<std::vector<Recording>, std::vector<Recording>> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  NoiseModel nm = build_noise_model(cfg);
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Recording> mi_trials;
  std::vector<Recording> rest_trials;
  mi_trials.reserve(static_cast<size_t>(cfg.n_mi_trials));
  rest_trials.reserve(static_cast<size_t>(cfg.n_rest_trials));
  for (int i = 0; i < cfg.n_mi_trials; ++i) {
    mi_trials.push_back(make_trial(cfg, nm, rng, gauss, true));
  }
  for (int i = 0; i < cfg.n_rest_trials; ++i) {
    rest_trials.push_back(make_trial(cfg, nm, rng, gauss, false));
  }
  return {std::move(mi_trials), std::move(rest_trials)};
}

namespace {

void check_compatible(const Recording& a, const Recording& b) {
  if (a.sample_rate_hz != b.sample_rate_hz) {
    throw std::runtime_error("compose: trials disagree on sample rate");
  }
  if (a.channels != b.channels) {
    throw std::runtime_error("compose: trials disagree on channel set");
  }
}

// Cyclic reader over the concatenated rest trials.
class RestSource {
 public:
  explicit RestSource(const std::vector<Recording>* trials) : trials_(trials) {}

  void take(Eigen::MatrixXf& dst, std::int64_t dst_row, std::int64_t count) {
    if (trials_->empty()) {
      throw std::runtime_error("compose: rest material requested but rest_trials is empty");
    }
    while (count > 0) {
      const Recording& r = (*trials_)[trial_];
      std::int64_t avail = r.n_samples() - offset_;
      std::int64_t chunk = std::min(avail, count);
      dst.middleRows(dst_row, chunk) = r.samples.middleRows(offset_, chunk);
      dst_row += chunk;
      offset_ += chunk;
      count -= chunk;
      if (offset_ == r.n_samples()) {
        offset_ = 0;
        trial_ = (trial_ + 1) % trials_->size();
      }
    }
  }

 private:
  const std::vector<Recording>* trials_;
  size_t trial_ = 0;
  std::int64_t offset_ = 0;
};

}  // namespace

Recording compose_continuous(const std::vector<Recording>& mi_trials,
                             const std::vector<Recording>& rest_trials,
                             std::uint64_t rng_seed, double min_rest_s, double max_rest_s) {
  if (mi_trials.empty()) throw std::runtime_error("compose: mi_trials is empty");
  if (!(min_rest_s >= 0) || !(max_rest_s >= min_rest_s)) {
    throw std::runtime_error("compose: need 0 <= min_rest_s <= max_rest_s");
  }
  const Recording& ref = mi_trials.front();
  for (const Recording& r : mi_trials) check_compatible(ref, r);
  for (const Recording& r : rest_trials) check_compatible(ref, r);

  std::mt19937_64 rng(rng_seed);
  const bool leading_rest = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  auto draw_rest_samples = [&]() -> std::int64_t {
    double dur_s = std::uniform_real_distribution<double>(min_rest_s, max_rest_s)(rng);
    return std::llround(dur_s * ref.sample_rate_hz);
  };

  const int n_gaps = static_cast<int>(mi_trials.size()) - 1 + (leading_rest ? 1 : 0);
  std::vector<std::int64_t> gap_samples;
  gap_samples.reserve(static_cast<size_t>(n_gaps));
  for (int i = 0; i < n_gaps; ++i) gap_samples.push_back(draw_rest_samples());

  std::int64_t total = 0;
  for (const Recording& r : mi_trials) total += r.n_samples();
  for (std::int64_t g : gap_samples) total += g;

  Recording out;
  out.sample_rate_hz = ref.sample_rate_hz;
  out.channels = ref.channels;
  out.topology = ref.topology;
  out.samples.resize(total, ref.n_channels());

  RestSource rest_src(&rest_trials);
  std::int64_t row = 0;
  size_t gap_idx = 0;
  auto append_rest = [&]() {
    std::int64_t g = gap_samples[gap_idx++];
    if (g > 0) {
      rest_src.take(out.samples, row, g);
      out.markers.push_back(Marker{row, g, kLabelRest});
      row += g;
    }
  };

  if (leading_rest) append_rest();
  for (size_t i = 0; i < mi_trials.size(); ++i) {
    if (i > 0) append_rest();
    const Recording& r = mi_trials[i];
    out.samples.middleRows(row, r.n_samples()) = r.samples;
    out.markers.push_back(Marker{row, r.n_samples(), kLabelMi});
    row += r.n_samples();
  }
  out.validate();
  return out;
}

std::vector<std::string> interval_truth_labels(const std::vector<Marker>& markers,
                                               const std::vector<std::int64_t>& starts,
                                               std::int64_t len, double overlap_rule) {
  if (len < 1) throw std::runtime_error("interval_truth_labels: len must be >= 1");
  std::vector<std::string> labels;
  labels.reserve(starts.size());
  for (std::int64_t start : starts) {
    const std::int64_t end = start + len;
    std::int64_t mi_samples = 0;
    for (const Marker& m : markers) {
      if (m.label != kLabelMi) continue;
      std::int64_t lo = std::max(start, m.onset_sample);
      std::int64_t hi = std::min(end, m.onset_sample + m.duration_samples);
      if (hi > lo) mi_samples += hi - lo;
    }
    double frac = static_cast<double>(mi_samples) / static_cast<double>(len);
    labels.push_back(frac > overlap_rule ? kLabelMi : kLabelRest);
  }
  return labels;
}

std::vector<SegmentLabel> segment_truth(const Recording& rec, std::int64_t segment_len,
                                        std::int64_t hop, double overlap_rule) {
  if (segment_len < 1 || hop < 1) throw std::runtime_error("segment_truth: segment_len and hop must be >= 1");
  if (segment_len > rec.n_samples()) {
    throw std::runtime_error(strfmt("segment_truth: segment_len %lld exceeds recording length %lld",
                                    static_cast<long long>(segment_len),
                                    static_cast<long long>(rec.n_samples())));
  }
  const std::int64_t n_seg = (rec.n_samples() - segment_len) / hop + 1;
  std::vector<std::int64_t> starts;
  starts.reserve(static_cast<size_t>(n_seg));
  for (std::int64_t k = 0; k < n_seg; ++k) starts.push_back(k * hop);
  std::vector<std::string> labels = interval_truth_labels(rec.markers, starts, segment_len, overlap_rule);
  std::vector<SegmentLabel> out;
  out.reserve(labels.size());
  for (std::int64_t k = 0; k < n_seg; ++k) {
    out.push_back(SegmentLabel{k, labels[static_cast<size_t>(k)]});
  }
  return out;
}

}  // namespace mionset
