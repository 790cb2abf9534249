#include "mionset/filters.hpp"

#include <cmath>
#include <numbers>

#include "mionset/common.hpp"

namespace mionset {

void BandpassSpec::validate(double sample_rate_hz) const {
  if (!(sample_rate_hz > 0)) throw std::runtime_error("bandpass: sample rate must be positive");
  if (!(low_hz > 0) || !(low_hz < high_hz) || !(high_hz < sample_rate_hz / 2)) {
    throw std::runtime_error(
        strfmt("bandpass: need 0 < low_hz < high_hz < nyquist; got [%g, %g] at %g Hz",
               low_hz, high_hz, sample_rate_hz));
  }
  if (order < 1 || order > 12) throw std::runtime_error("bandpass: order must be in [1, 12]");
}

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

struct BandpassDesign {
  std::vector<cplx> poles;  // 2*order digital poles, conjugates adjacent
  double gain = 0.0;        // overall gain of gain * (z-1)^order (z+1)^order / prod(z - p)
  int order = 0;
};

// Analog Butterworth prototype -> prewarped lowpass-to-bandpass transform ->
// bilinear map. Returns digital poles grouped so that each consecutive pair
// shares one biquad (conjugate pair, or two reals from a real prototype pole).
BandpassDesign analyze(const BandpassSpec& spec, double fs) {
  const int n = spec.order;
  const double K = 2.0 * fs;
  const double wl = K * std::tan(kPi * spec.low_hz / fs);
  const double wh = K * std::tan(kPi * spec.high_hz / fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // Prototype poles with non-negative imaginary part; conjugates are implied.
  std::vector<cplx> seeds;
  for (int k = 0; k < n; ++k) {
    double theta = kPi * (2.0 * k + n + 1.0) / (2.0 * n);
    cplx p(std::cos(theta), std::sin(theta));
    if (p.imag() > 1e-12) seeds.push_back(p);
    if (std::abs(p.imag()) <= 1e-12) seeds.push_back(cplx(p.real(), 0.0));
  }

  // Analog bandpass poles: each prototype pole p maps to the roots of
  // s^2 - p*bw*s + w0^2.
  std::vector<cplx> analog;  // grouped in biquad pairs
  for (const cplx& p : seeds) {
    cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
    cplx qa = (p * bw + disc) / 2.0;
    cplx qb = (p * bw - disc) / 2.0;
    if (p.imag() > 0) {
      // Complex prototype pole: qa and qb each pair with their own conjugate.
      analog.push_back(qa);
      analog.push_back(std::conj(qa));
      analog.push_back(qb);
      analog.push_back(std::conj(qb));
    } else {
      // Real prototype pole: qa and qb already form one section.
      analog.push_back(qa);
      analog.push_back(qb);
    }
  }

  BandpassDesign d;
  d.order = n;
  // Gain of the analog bandpass is bw^n * s^n / prod(s - p_i); after the
  // bilinear substitution s = K (z-1)/(z+1) the constant factor becomes
  // bw^n K^n / prod(K - p_i).
  cplx denom(1.0, 0.0);
  for (const cplx& p : analog) denom *= (K - p);
  d.gain = std::pow(bw * K, n) / denom.real();
  for (const cplx& p : analog) {
    cplx z = (K + p) / (K - p);
    if (std::abs(z) >= 1.0 - 1e-12) {
      throw std::runtime_error("bandpass: design produced a pole on or outside the unit circle");
    }
    d.poles.push_back(z);
  }
  return d;
}

}  // namespace

BiquadCascade design_bandpass(const BandpassSpec& spec, double sample_rate_hz) {
  spec.validate(sample_rate_hz);
  BandpassDesign d = analyze(spec, sample_rate_hz);

  BiquadCascade cascade;
  const double stage_gain = std::pow(d.gain, 1.0 / d.order);
  for (int s = 0; s < d.order; ++s) {
    const cplx& za = d.poles[static_cast<size_t>(2 * s)];
    const cplx& zb = d.poles[static_cast<size_t>(2 * s + 1)];
    Biquad bq;
    bq.b0 = stage_gain;
    bq.b1 = 0.0;
    bq.b2 = -stage_gain;  // zeros at z = +1 and z = -1
    bq.a1 = -(za + zb).real();
    bq.a2 = (za * zb).real();
    cascade.stages.push_back(bq);
  }
  return cascade;
}

std::complex<double> designed_bandpass_response(const BandpassSpec& spec, double sample_rate_hz,
                                                double freq_hz) {
  BandpassDesign d = analyze(spec, sample_rate_hz);
  const cplx z = std::polar(1.0, 2.0 * kPi * freq_hz / sample_rate_hz);
  cplx num = std::pow(z - 1.0, d.order) * std::pow(z + 1.0, d.order);
  cplx den(1.0, 0.0);
  for (const cplx& p : d.poles) den *= (z - p);
  return d.gain * num / den;
}

std::complex<double> BiquadCascade::response(double freq_hz, double sample_rate_hz) const {
  const cplx z1 = std::polar(1.0, -2.0 * kPi * freq_hz / sample_rate_hz);
  const cplx z2 = z1 * z1;
  cplx h(1.0, 0.0);
  for (const Biquad& s : stages) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

double BiquadCascade::gain_db(double freq_hz, double sample_rate_hz) const {
  return 20.0 * std::log10(std::abs(response(freq_hz, sample_rate_hz)));
}

void filter_inplace(const BiquadCascade& cascade, Eigen::VectorXd& x) {
  for (const Biquad& s : cascade.stages) {
    double s1 = 0.0, s2 = 0.0;  // direct form II transposed state
    for (Eigen::Index t = 0; t < x.size(); ++t) {
      const double in = x[t];
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      x[t] = out;
    }
  }
}

Recording bandpass_filter(const Recording& rec, const BandpassSpec& spec) {
  rec.validate();
  BiquadCascade cascade = design_bandpass(spec, rec.sample_rate_hz);
  Recording out = rec;
  for (int c = 0; c < rec.n_channels(); ++c) {
    Eigen::VectorXd col = rec.samples.col(c).cast<double>();
    filter_inplace(cascade, col);
    out.samples.col(c) = col.cast<float>();
  }
  return out;
}

Recording laplacian_filter(const Recording& rec) {
  rec.validate();
  Recording out = rec;
  for (int c = 0; c < rec.n_channels(); ++c) {
    auto it = rec.topology.find(rec.channels[static_cast<size_t>(c)]);
    if (it == rec.topology.end() || it->second.empty()) continue;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(rec.n_samples());
    for (const std::string& nb : it->second) {
      auto pos = std::find(rec.channels.begin(), rec.channels.end(), nb);
      int nb_idx = static_cast<int>(pos - rec.channels.begin());
      acc += rec.samples.col(nb_idx).cast<double>();
    }
    acc /= static_cast<double>(it->second.size());
    Eigen::VectorXd result = rec.samples.col(c).cast<double>() - acc;
    out.samples.col(c) = result.cast<float>();
  }
  return out;
}

}  // namespace mionset
