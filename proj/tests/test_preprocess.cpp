#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "mionset/common.hpp"
#include "mionset/cwt.hpp"
#include "mionset/filters.hpp"
#include "mionset/pca.hpp"

using namespace mionset;

namespace {

constexpr double kPi = std::numbers::pi;

Recording make_rec(int n_samples, int n_channels, double fs = 100.0) {
  Recording rec;
  rec.sample_rate_hz = fs;
  for (int c = 0; c < n_channels; ++c) rec.channels.push_back(strfmt("ch%d", c));
  rec.samples = Eigen::MatrixXf::Zero(n_samples, n_channels);
  return rec;
}

Recording random_rec(int n_samples, int n_channels, unsigned seed) {
  Recording rec = make_rec(n_samples, n_channels);
  std::mt19937 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  for (Eigen::Index i = 0; i < rec.samples.size(); ++i) rec.samples.data()[i] = gauss(rng);
  return rec;
}

Recording sine_rec(double freq_hz, double n_seconds, double fs = 100.0) {
  Recording rec = make_rec(static_cast<int>(std::lround(n_seconds * fs)), 1, fs);
  for (Eigen::Index t = 0; t < rec.samples.rows(); ++t) {
    rec.samples(t, 0) = static_cast<float>(std::sin(2.0 * kPi * freq_hz * t / fs));
  }
  return rec;
}

// RMS-derived amplitude over the final second of a sine response.
double steady_amplitude(const Recording& rec, double fs) {
  const Eigen::Index n = rec.samples.rows();
  const Eigen::Index tail = static_cast<Eigen::Index>(fs);
  const auto seg = rec.samples.col(0).tail(tail).cast<double>();
  return std::sqrt(2.0 * seg.squaredNorm() / static_cast<double>(tail));
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ac = a.array() - a.mean();
  const Eigen::VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

TEST_CASE("laplacian removes the common mode") {
  Recording rec = make_rec(4, 5);
  rec.samples.setConstant(5.0f);
  rec.topology = {{"ch0", {"ch1", "ch2", "ch3", "ch4"}}};
  const Recording out = laplacian_filter(rec);
  CHECK(out.samples.col(0).isZero());
  CHECK(out.samples.col(1) == rec.samples.col(1));
}

TEST_CASE("laplacian with empty topology is the identity") {
  const Recording rec = random_rec(32, 3, 1);
  const Recording out = laplacian_filter(rec);
  CHECK(out.samples == rec.samples);
}

TEST_CASE("laplacian matches the direct neighbor-mean formula") {
  Recording rec = random_rec(64, 3, 2);
  rec.topology = {{"ch0", {"ch1", "ch2"}}};
  const Recording out = laplacian_filter(rec);
  for (Eigen::Index t = 0; t < rec.samples.rows(); ++t) {
    const float expect = rec.samples(t, 0) - (rec.samples(t, 1) + rec.samples(t, 2)) / 2.0f;
    CHECK(out.samples(t, 0) == doctest::Approx(expect).epsilon(1e-6));
  }
  CHECK(out.samples.col(1) == rec.samples.col(1));
  CHECK(out.samples.col(2) == rec.samples.col(2));
  CHECK(out.markers.size() == rec.markers.size());
}

TEST_CASE("bandpass of zero is zero") {
  const Recording rec = make_rec(200, 2);
  const Recording out = bandpass_filter(rec, BandpassSpec{});
  CHECK(out.samples.isZero());
  CHECK(out.samples.rows() == rec.samples.rows());
}

TEST_CASE("bandpass passes 10 Hz within 1 dB") {
  const Recording out = bandpass_filter(sine_rec(10.0, 3.0), BandpassSpec{});
  const double amp = steady_amplitude(out, 100.0);
  const double db = 20.0 * std::log10(amp);
  CHECK(db > -1.0);
  CHECK(db < 1.0);
}

TEST_CASE("bandpass attenuates 2 Hz and 30 Hz by at least 20 dB") {
  for (double f : {2.0, 30.0}) {
    const Recording out = bandpass_filter(sine_rec(f, 3.0), BandpassSpec{});
    const double amp = steady_amplitude(out, 100.0);
    CHECK(20.0 * std::log10(1.0 / amp) >= 20.0);
  }
}

TEST_CASE("cascade response equals the pole-zero design response") {
  const BandpassSpec spec;
  const double fs = 100.0;
  const BiquadCascade cascade = design_bandpass(spec, fs);
  REQUIRE(cascade.stages.size() == 4);
  for (int i = 1; i <= 100; ++i) {
    const double f = 49.9 * i / 100.0;
    const std::complex<double> emitted = cascade.response(f, fs);
    const std::complex<double> designed = designed_bandpass_response(spec, fs, f);
    CHECK(std::abs(emitted - designed) <= 1e-9);
  }
}

TEST_CASE("bandpass is causal: future samples cannot change the past") {
  Recording rec = random_rec(300, 1, 3);
  Recording mutated = rec;
  for (Eigen::Index t = 200; t < 300; ++t) mutated.samples(t, 0) += 25.0f;
  const Recording out_a = bandpass_filter(rec, BandpassSpec{});
  const Recording out_b = bandpass_filter(mutated, BandpassSpec{});
  CHECK(out_a.samples.topRows(200) == out_b.samples.topRows(200));
  CHECK(out_a.samples.bottomRows(100) != out_b.samples.bottomRows(100));
}

TEST_CASE("bandpass spec validation") {
  auto spec = [](double lo, double hi, int order) { return BandpassSpec{lo, hi, order}; };
  CHECK_THROWS_AS(spec(13.0, 6.0, 4).validate(100.0), std::runtime_error);
  CHECK_THROWS_AS(spec(6.0, 60.0, 4).validate(100.0), std::runtime_error);
  CHECK_THROWS_AS(spec(0.0, 13.0, 4).validate(100.0), std::runtime_error);
  CHECK_THROWS_AS(spec(6.0, 13.0, 0).validate(100.0), std::runtime_error);
  CHECK_NOTHROW(BandpassSpec().validate(100.0));
}

TEST_CASE("pca on single-axis variance yields one component on that axis") {
  Recording rec = make_rec(256, 3);
  for (Eigen::Index t = 0; t < rec.samples.rows(); ++t) {
    rec.samples(t, 0) = static_cast<float>(std::sin(0.1 * static_cast<double>(t)));
  }
  const PcaModel model = pca_fit({rec}, 0.70);
  CHECK(model.m_prime == 1);
  CHECK(model.components(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(model.components(1, 0)) < 1e-9);
  CHECK(std::abs(model.components(2, 0)) < 1e-9);
  CHECK(model.explained_fraction == doctest::Approx(1.0));
}

TEST_CASE("pca on isotropic data keeps both axes at 0.70 retention") {
  const Recording rec = random_rec(6000, 2, 7);
  const PcaModel model = pca_fit({rec}, 0.70);
  CHECK(model.m_prime == 2);
  const double share = model.eigenvalues(0) / model.eigenvalues.sum();
  CHECK(share == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("pca components are orthonormal, eigenvalues sorted") {
  std::vector<Recording> trials = {random_rec(500, 6, 11), random_rec(500, 6, 12)};
  // Give the channels unequal scales so the spectrum is spread out.
  for (Recording& r : trials) {
    for (int c = 0; c < 6; ++c) r.samples.col(c) *= static_cast<float>(c + 1);
  }
  const PcaModel model = pca_fit(trials, 0.70);
  const Eigen::MatrixXd gram = model.components.transpose() * model.components;
  CHECK((gram - Eigen::MatrixXd::Identity(model.m_prime, model.m_prime)).cwiseAbs().maxCoeff() <= 1e-9);
  for (Eigen::Index i = 1; i < model.eigenvalues.size(); ++i) {
    CHECK(model.eigenvalues(i) <= model.eigenvalues(i - 1) + 1e-12);
  }
  CHECK(model.explained_fraction >= 0.70);
  // Sign convention: the dominant entry of every kept component is positive.
  for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
    Eigen::Index arg;
    model.components.col(c).cwiseAbs().maxCoeff(&arg);
    CHECK(model.components(arg, c) > 0.0);
  }
}

TEST_CASE("pca projection centers and reconstructs the retained variance") {
  const Recording rec = random_rec(2000, 4, 21);
  const PcaModel model = pca_fit({rec}, 0.70);

  // Projecting the mean itself gives zero.
  Recording flat = make_rec(5, 4);
  for (int t = 0; t < 5; ++t) flat.samples.row(t) = model.mean.cast<float>().transpose();
  const Recording zeros = pca_project(flat, model);
  CHECK(zeros.samples.cwiseAbs().maxCoeff() < 1e-5);
  CHECK(zeros.n_channels() == model.m_prime);
  CHECK(zeros.channels[0] == "pc0");

  // Reconstruction keeps at least the retained share of total variance.
  const Recording proj = pca_project(rec, model);
  const Eigen::MatrixXd x = rec.samples.cast<double>();
  const Eigen::MatrixXd xc = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd recon = proj.samples.cast<double>() * model.components.transpose();
  const double total = xc.squaredNorm();
  const double captured = recon.squaredNorm();
  CHECK(captured / total >= 0.70);
  CHECK(captured / total <= 1.0 + 1e-12);
}

TEST_CASE("pca rejects degenerate inputs") {
  CHECK_THROWS_AS(pca_fit({}, 0.7), std::runtime_error);
  CHECK_THROWS_AS(pca_fit({make_rec(3, 4)}, 0.7), std::runtime_error);  // fewer samples than channels
  CHECK_THROWS_AS(pca_fit({make_rec(64, 4)}, 0.7), std::runtime_error);  // zero variance
  CHECK_THROWS_AS(pca_fit({random_rec(64, 2, 1)}, 1.5), std::runtime_error);
}

TEST_CASE("cwt of zero input is zero at every scale") {
  const Recording rec = make_rec(128, 2);
  const CwtSpec spec = CwtSpec::geometric(6, 6.0, 13.0);
  const SeriesTensor out = cwt_decompose(rec, spec);
  CHECK(out.time == 128);
  CHECK(out.channels == 2);
  CHECK(out.scales == 6);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("geometric scale frequencies are increasing and inside the band") {
  const CwtSpec spec = CwtSpec::geometric(6, 6.0, 13.0);
  REQUIRE(spec.scale_center_freqs_hz.size() == 6);
  CHECK(spec.scale_center_freqs_hz.front() == doctest::Approx(6.0));
  CHECK(spec.scale_center_freqs_hz.back() == doctest::Approx(13.0));
  const double ratio = spec.scale_center_freqs_hz[1] / spec.scale_center_freqs_hz[0];
  for (size_t i = 1; i < 6; ++i) {
    CHECK(spec.scale_center_freqs_hz[i] > spec.scale_center_freqs_hz[i - 1]);
    CHECK(spec.scale_center_freqs_hz[i] / spec.scale_center_freqs_hz[i - 1] ==
          doctest::Approx(ratio).epsilon(1e-9));
  }
  CHECK_NOTHROW(spec.validate(6.0, 13.0));
  CHECK_THROWS_AS(spec.validate(8.0, 13.0), std::runtime_error);
}

TEST_CASE("a sine at a scale's center frequency peaks at that scale") {
  const CwtSpec spec = CwtSpec::geometric(6, 6.0, 13.0);
  for (int probe = 0; probe < 6; ++probe) {
    const Recording rec = sine_rec(spec.scale_center_freqs_hz[static_cast<size_t>(probe)], 12.0);
    const SeriesTensor out = cwt_decompose(rec, spec);
    // Time-averaged magnitude per scale over the interior (edges are padded).
    int best = -1;
    double best_mag = -1.0;
    for (int s = 0; s < 6; ++s) {
      double mag = 0.0;
      for (std::int64_t t = 200; t < out.time - 200; ++t) mag += std::abs(out.at(t, 0, s));
      if (mag > best_mag) {
        best_mag = mag;
        best = s;
      }
    }
    CHECK(best == probe);
  }
}

TEST_CASE("scale series sum tracks the bandpassed input") {
  Recording noise = random_rec(1500, 1, 33);
  const Recording banded = bandpass_filter(noise, BandpassSpec{});
  const CwtSpec spec = CwtSpec::geometric(6, 6.0, 13.0);
  const SeriesTensor out = cwt_decompose(banded, spec);

  const std::int64_t margin = 150;
  const std::int64_t n = out.time - 2 * margin;
  Eigen::VectorXd sum(n), ref(n);
  for (std::int64_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int s = 0; s < 6; ++s) acc += out.at(t + margin, 0, s);
    sum(t) = acc;
    ref(t) = banded.samples(t + margin, 0);
  }
  CHECK(pearson(sum, ref) >= 0.9);
}

TEST_CASE("preprocessing stages are linear") {
  const int n = 400;
  const Recording x = random_rec(n, 3, 51);
  const Recording y = random_rec(n, 3, 52);
  const double a = 1.7, b = -0.6;
  Recording mix = x;
  mix.samples = (a * x.samples.cast<double>() + b * y.samples.cast<double>()).cast<float>();

  auto check_linear = [&](auto&& f) {
    const Eigen::MatrixXf fx = f(x).samples;
    const Eigen::MatrixXf fy = f(y).samples;
    const Eigen::MatrixXf fmix = f(mix).samples;
    const Eigen::MatrixXd combined = a * fx.cast<double>() + b * fy.cast<double>();
    const double err = (fmix.cast<double>() - combined).norm() / combined.norm();
    CHECK(err <= 1e-6);
  };

  Recording topo = x;  // shared topology template for the laplacian case
  topo.topology = {{"ch0", {"ch1", "ch2"}}, {"ch1", {"ch0"}}};
  check_linear([&](const Recording& r) {
    Recording in = r;
    in.topology = topo.topology;
    return laplacian_filter(in);
  });
  check_linear([](const Recording& r) { return bandpass_filter(r, BandpassSpec{}); });

  PcaModel model = pca_fit({x}, 0.9);
  model.mean.setZero();  // test the linear part; the affine shift is centering
  check_linear([&](const Recording& r) { return pca_project(r, model); });

  const CwtSpec spec = CwtSpec::geometric(4, 6.0, 13.0);
  auto cwt_mat = [&](const Recording& r) {
    const SeriesTensor st = cwt_decompose(r, spec);
    Recording out = make_rec(static_cast<int>(st.time), st.channels * st.scales);
    for (std::int64_t t = 0; t < st.time; ++t) {
      for (int c = 0; c < st.channels; ++c) {
        for (int s = 0; s < st.scales; ++s) {
          out.samples(t, c * st.scales + s) = static_cast<float>(st.at(t, c, s));
        }
      }
    }
    return out;
  };
  check_linear(cwt_mat);
}

TEST_CASE("window counts follow the hop formula") {
  SeriesTensor series;
  series.time = 100;
  series.channels = 1;
  series.scales = 1;
  series.data.assign(100, 0.0);
  for (std::int64_t t = 0; t < 100; ++t) series.at(t, 0, 0) = static_cast<double>(t);

  const WindowPair three = make_windows(series, 25, 25, 25);
  CHECK(three.inputs.n_windows == 3);
  CHECK(three.targets.n_windows == 3);

  series.time = 50;
  series.data.resize(50);
  const WindowPair one = make_windows(series, 25, 25, 25);
  CHECK(one.inputs.n_windows == 1);

  series.time = 49;
  series.data.resize(49);
  CHECK_THROWS_AS(make_windows(series, 25, 25, 25), std::runtime_error);
}

TEST_CASE("windows slice the series contiguously") {
  SeriesTensor series;
  series.time = 130;
  series.channels = 2;
  series.scales = 3;
  series.data.resize(static_cast<size_t>(130 * 2 * 3));
  for (std::int64_t t = 0; t < 130; ++t) {
    for (int c = 0; c < 2; ++c) {
      for (int s = 0; s < 3; ++s) series.at(t, c, s) = 1000.0 * static_cast<double>(t) + 10.0 * c + s;
    }
  }
  const WindowPair pair = make_windows(series, 20, 10, 15);
  CHECK(pair.inputs.n_windows == (130 - 30) / 15 + 1);
  for (std::int64_t k = 0; k < pair.inputs.n_windows; ++k) {
    CHECK(pair.inputs.origins[static_cast<size_t>(k)] == k * 15);
    CHECK(pair.targets.origins[static_cast<size_t>(k)] == k * 15 + 20);
    for (int t = 0; t < 20; ++t) {
      for (int c = 0; c < 2; ++c) {
        for (int s = 0; s < 3; ++s) {
          CHECK(pair.inputs.at(k, t, c, s) == series.at(k * 15 + t, c, s));
        }
      }
    }
    // Target k starts exactly one sample after input k ends.
    CHECK(pair.targets.at(k, 0, 0, 0) == series.at(k * 15 + 20, 0, 0));
    for (int t = 0; t < 10; ++t) {
      CHECK(pair.targets.at(k, t, 1, 2) == series.at(k * 15 + 20 + t, 1, 2));
    }
  }
}
