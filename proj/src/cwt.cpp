#include "mionset/cwt.hpp"

#include <cmath>
#include <numbers>

#include "mionset/common.hpp"

namespace mionset {

CwtSpec CwtSpec::geometric(int q, double low_hz, double high_hz, double omega0) {
  if (q < 1) throw std::runtime_error("cwt: q must be >= 1");
  CwtSpec spec;
  spec.q = q;
  spec.omega0 = omega0;
  if (q == 1) {
    spec.scale_center_freqs_hz.push_back(std::sqrt(low_hz * high_hz));
  } else {
    const double ratio = high_hz / low_hz;
    for (int i = 0; i < q; ++i) {
      spec.scale_center_freqs_hz.push_back(low_hz * std::pow(ratio, static_cast<double>(i) / (q - 1)));
    }
  }
  spec.validate(low_hz, high_hz);
  return spec;
}

void CwtSpec::validate(double low_hz, double high_hz) const {
  if (q < 1) throw std::runtime_error("cwt: q must be >= 1");
  if (!(omega0 > 0)) throw std::runtime_error("cwt: omega0 must be positive");
  if (static_cast<int>(scale_center_freqs_hz.size()) != q) {
    throw std::runtime_error(strfmt("cwt: expected %d scale frequencies, got %zu", q,
                                    scale_center_freqs_hz.size()));
  }
  double prev = 0.0;
  for (double f : scale_center_freqs_hz) {
    if (!(f > prev)) throw std::runtime_error("cwt: scale frequencies must be strictly increasing");
    if (f < low_hz - 1e-9 || f > high_hz + 1e-9) {
      throw std::runtime_error(strfmt("cwt: scale frequency %g outside band [%g, %g]", f, low_hz, high_hz));
    }
    prev = f;
  }
}

namespace {

// Real Morlet kernel at scale d (in samples), 1/d amplitude normalization:
//   k[m] = pi^(-1/4)/d * cos(omega0 * m/d) * exp(-m^2 / (2 d^2))
// truncated where the Gaussian envelope falls below ~1e-8.
std::vector<double> morlet_kernel(double center_freq_hz, double omega0, double sample_rate_hz,
                                  int* half_out) {
  const double d = omega0 * sample_rate_hz / (2.0 * std::numbers::pi * center_freq_hz);
  const int half = static_cast<int>(std::ceil(6.0 * d));
  const double norm = std::pow(std::numbers::pi, -0.25) / d;
  std::vector<double> kernel(static_cast<size_t>(2 * half + 1));
  for (int m = -half; m <= half; ++m) {
    const double u = m / d;
    kernel[static_cast<size_t>(m + half)] = norm * std::cos(omega0 * u) * std::exp(-0.5 * u * u);
  }
  *half_out = half;
  return kernel;
}

}  // namespace

SeriesTensor cwt_decompose(const Recording& rec, const CwtSpec& spec) {
  rec.validate();
  if (static_cast<int>(spec.scale_center_freqs_hz.size()) != spec.q) {
    throw std::runtime_error("cwt: spec has wrong number of scale frequencies");
  }
  const std::int64_t time = rec.n_samples();
  const int n_ch = rec.n_channels();

  SeriesTensor out;
  out.time = time;
  out.channels = n_ch;
  out.scales = spec.q;
  out.data.assign(static_cast<size_t>(time) * n_ch * spec.q, 0.0);

  for (int s = 0; s < spec.q; ++s) {
    int half = 0;
    std::vector<double> kernel = morlet_kernel(spec.scale_center_freqs_hz[static_cast<size_t>(s)],
                                               spec.omega0, rec.sample_rate_hz, &half);
    for (int c = 0; c < n_ch; ++c) {
      Eigen::VectorXd x = rec.samples.col(c).cast<double>();
      for (std::int64_t t = 0; t < time; ++t) {
        const std::int64_t m_lo = std::max<std::int64_t>(-half, t - (time - 1));
        const std::int64_t m_hi = std::min<std::int64_t>(half, t);
        double acc = 0.0;
        for (std::int64_t m = m_lo; m <= m_hi; ++m) {
          acc += kernel[static_cast<size_t>(m + half)] * x[t - m];
        }
        out.at(t, c, s) = acc;
      }
    }
  }
  return out;
}

WindowPair make_windows(const SeriesTensor& series, int input_len, int output_len, int hop) {
  if (input_len < 1 || output_len < 1 || hop < 1) {
    throw std::runtime_error("windows: input_len, output_len, and hop must be >= 1");
  }
  const std::int64_t need = static_cast<std::int64_t>(input_len) + output_len;
  if (series.time < need) {
    throw std::runtime_error(strfmt("windows: series has %lld samples but one window needs %lld",
                                    static_cast<long long>(series.time), static_cast<long long>(need)));
  }
  const std::int64_t n = (series.time - need) / hop + 1;

  auto alloc = [&](WindowTensor& wt, int len) {
    wt.n_windows = n;
    wt.window_len = len;
    wt.channels = series.channels;
    wt.scales = series.scales;
    wt.data.resize(static_cast<size_t>(n) * len * series.channels * series.scales);
    wt.origins.resize(static_cast<size_t>(n));
  };
  WindowPair pair;
  alloc(pair.inputs, input_len);
  alloc(pair.targets, output_len);

  const size_t row_elems = static_cast<size_t>(series.channels) * series.scales;
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t start = k * hop;
    pair.inputs.origins[static_cast<size_t>(k)] = start;
    pair.targets.origins[static_cast<size_t>(k)] = start + input_len;
    const double* src_in = &series.data[static_cast<size_t>(start) * row_elems];
    std::copy(src_in, src_in + static_cast<size_t>(input_len) * row_elems,
              &pair.inputs.data[static_cast<size_t>(k) * input_len * row_elems]);
    const double* src_tg = &series.data[(static_cast<size_t>(start) + input_len) * row_elems];
    std::copy(src_tg, src_tg + static_cast<size_t>(output_len) * row_elems,
              &pair.targets.data[static_cast<size_t>(k) * output_len * row_elems]);
  }
  return pair;
}

}  // namespace mionset
