#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "mionset/common.hpp"
#include "mionset/recording.hpp"
#include "mionset/synth.hpp"

using namespace mionset;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mionset_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Recording small_recording() {
  Recording rec;
  rec.sample_rate_hz = 100.0;
  rec.channels = {"a", "b"};
  rec.samples.resize(3, 2);
  rec.samples << 1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f;
  rec.topology = {{"a", {"b"}}};
  rec.markers = {Marker{0, 2, kLabelMi}, Marker{2, 1, kLabelRest}};
  return rec;
}

// One-sided periodogram power summed over DFT bins inside [lo_hz, hi_hz].
double band_power(const Eigen::VectorXf& x, double fs, double lo_hz, double hi_hz) {
  const int n = static_cast<int>(x.size());
  double total = 0.0;
  for (int k = 1; k <= n / 2; ++k) {
    const double f = fs * k / n;
    if (f < lo_hz || f > hi_hz) continue;
    double re = 0.0, im = 0.0;
    for (int t = 0; t < n; ++t) {
      const double ang = 2.0 * std::numbers::pi * k * t / n;
      re += x[t] * std::cos(ang);
      im -= x[t] * std::sin(ang);
    }
    total += 2.0 * (re * re + im * im) / (static_cast<double>(n) * n);
  }
  return total;
}

double mean_band_power(const std::vector<Recording>& trials, int n_channels) {
  double sum = 0.0;
  int count = 0;
  for (const Recording& r : trials) {
    for (int c = 0; c < n_channels; ++c) {
      sum += band_power(r.samples.col(c), r.sample_rate_hz, 8.0, 12.0);
      ++count;
    }
  }
  return sum / count;
}

}  // namespace

TEST_CASE("recording validation rejects broken invariants") {
  Recording rec = small_recording();
  CHECK_NOTHROW(rec.validate());

  Recording bad = rec;
  bad.channels = {"a", "a"};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("duplicate"), std::runtime_error);

  bad = rec;
  bad.samples(1, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("non-finite"), std::runtime_error);

  bad = rec;
  bad.topology = {{"a", {"zz"}}};
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = rec;
  bad.markers = {Marker{0, 2, kLabelMi}, Marker{1, 2, kLabelRest}};
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = rec;
  bad.markers = {Marker{0, 5, kLabelMi}};
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = rec;
  bad.markers = {Marker{0, 1, "blink"}};
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
}

TEST_CASE("minimal handwritten file loads as a 3x2 recording") {
  const fs::path dir = temp_dir("minimal");
  write_file_atomic(dir / "rec.json",
                    "{\"sample_rate_hz\": 10.0, \"channels\": [\"x\", \"y\"], \"n_samples\": 3,"
                    " \"topology\": {}, \"markers\": []}\n");
  write_f32_file(dir / "rec.f32", {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});

  const Recording rec = load_recording(dir / "rec");
  CHECK(rec.n_samples() == 3);
  CHECK(rec.n_channels() == 2);
  CHECK(rec.samples(0, 1) == 2.0f);
  CHECK(rec.samples(2, 0) == 5.0f);
}

TEST_CASE("sample count mismatch is reported") {
  const fs::path dir = temp_dir("mismatch");
  write_file_atomic(dir / "rec.json",
                    "{\"sample_rate_hz\": 10.0, \"channels\": [\"x\", \"y\"], \"n_samples\": 4,"
                    " \"topology\": {}, \"markers\": []}\n");
  write_f32_file(dir / "rec.f32", {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_WITH_AS(load_recording(dir / "rec"), doctest::Contains("sample-count mismatch"),
                       std::runtime_error);
}

TEST_CASE("single zero sample serializes to four zero bytes") {
  const fs::path dir = temp_dir("zero");
  Recording rec;
  rec.sample_rate_hz = 1.0;
  rec.channels = {"only"};
  rec.samples = Eigen::MatrixXf::Zero(1, 1);
  save_recording(rec, dir / "zero");

  const std::string payload = read_file(dir / "zero.f32");
  REQUIRE(payload.size() == 4);
  CHECK(payload == std::string(4, '\0'));
}

TEST_CASE("markers serialize in onset order") {
  const fs::path dir = temp_dir("markers");
  save_recording(small_recording(), dir / "rec");
  const std::string meta = read_file(dir / "rec.json");
  const size_t first = meta.find("\"onset_sample\": 0");
  const size_t second = meta.find("\"onset_sample\": 2");
  REQUIRE(first != std::string::npos);
  REQUIRE(second != std::string::npos);
  CHECK(first < second);
}

TEST_CASE("save then load is the identity, load then save is byte exact") {
  const fs::path dir = temp_dir("roundtrip");
  std::mt19937_64 rng(42);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  Recording rec;
  rec.sample_rate_hz = 250.0;
  for (int c = 0; c < 8; ++c) rec.channels.push_back(strfmt("e%d", c));
  rec.samples.resize(64, 8);
  for (Eigen::Index i = 0; i < rec.samples.size(); ++i) rec.samples.data()[i] = gauss(rng);
  rec.topology = {{"e0", {"e1", "e2"}}, {"e3", {"e0"}}};
  rec.markers = {Marker{4, 16, kLabelMi}, Marker{32, 8, kLabelRest}};

  save_recording(rec, dir / "r");
  const Recording back = load_recording(dir / "r");
  CHECK(back.sample_rate_hz == rec.sample_rate_hz);
  CHECK(back.channels == rec.channels);
  CHECK(back.samples == rec.samples);
  CHECK(back.topology == rec.topology);
  REQUIRE(back.markers.size() == rec.markers.size());
  CHECK(back.markers[0].onset_sample == 4);
  CHECK(back.markers[1].duration_samples == 8);

  save_recording(back, dir / "r2");
  CHECK(read_file(dir / "r.json") == read_file(dir / "r2.json"));
  CHECK(read_file(dir / "r.f32") == read_file(dir / "r2.f32"));
}

TEST_CASE("synthetic trials are deterministic per seed") {
  SynthConfig cfg;
  cfg.n_mi_trials = 3;
  cfg.n_rest_trials = 2;
  auto [mi_a, rest_a] = synth_generate(cfg);
  auto [mi_b, rest_b] = synth_generate(cfg);
  REQUIRE(mi_a.size() == 3);
  REQUIRE(rest_a.size() == 2);
  for (size_t i = 0; i < mi_a.size(); ++i) CHECK(mi_a[i].samples == mi_b[i].samples);
  for (size_t i = 0; i < rest_a.size(); ++i) CHECK(rest_a[i].samples == rest_b[i].samples);

  cfg.rng_seed = 2;
  auto [mi_c, rest_c] = synth_generate(cfg);
  CHECK(mi_a[0].samples != mi_c[0].samples);
}

TEST_CASE("trial structure: labels, duration, marker coverage") {
  SynthConfig cfg;
  cfg.n_mi_trials = 2;
  cfg.n_rest_trials = 1;
  auto [mi, rest] = synth_generate(cfg);
  for (const Recording& r : mi) {
    CHECK(r.n_samples() == cfg.trial_samples());
    REQUIRE(r.markers.size() == 1);
    CHECK(r.markers[0].label == kLabelMi);
    CHECK(r.markers[0].duration_samples == r.n_samples());
    CHECK_NOTHROW(r.validate());
  }
  REQUIRE(rest.size() == 1);
  CHECK(rest[0].markers[0].label == kLabelRest);
}

TEST_CASE("task trials carry the configured burst power on active channels") {
  SynthConfig cfg;  // defaults: gain 8, burst 10 Hz, 4 of 8 channels active
  auto [mi, rest] = synth_generate(cfg);

  const int active = cfg.n_active_channels();
  REQUIRE(active == 4);
  const double mi_power = mean_band_power(mi, active);
  const double rest_power = mean_band_power(rest, active);
  const double ratio = mi_power / rest_power;
  // Additive burst power is gain times the expected in-band noise power, so
  // the band-power ratio concentrates around 1 + gain.
  const double expected = 1.0 + cfg.mi_amplitude_gain;
  CHECK(ratio > 0.80 * expected);
  CHECK(ratio < 1.20 * expected);

  // Passive channels carry no burst.
  double passive_mi = 0.0, passive_rest = 0.0;
  for (const Recording& r : mi) passive_mi += band_power(r.samples.col(7), r.sample_rate_hz, 8.0, 12.0);
  for (const Recording& r : rest) passive_rest += band_power(r.samples.col(7), r.sample_rate_hz, 8.0, 12.0);
  const double passive_ratio = (passive_mi / mi.size()) / (passive_rest / rest.size());
  CHECK(passive_ratio > 0.5);
  CHECK(passive_ratio < 2.0);
}

TEST_CASE("zero gain produces statistically matching task and rest trials") {
  SynthConfig cfg;
  cfg.mi_amplitude_gain = 0.0;
  cfg.n_mi_trials = 12;
  cfg.n_rest_trials = 12;
  auto [mi, rest] = synth_generate(cfg);
  const double ratio = mean_band_power(mi, cfg.n_channels) / mean_band_power(rest, cfg.n_channels);
  CHECK(ratio > 0.7);
  CHECK(ratio < 1.4);
}

TEST_CASE("composition with zero rest reduces to the task trial") {
  SynthConfig cfg;
  cfg.n_mi_trials = 1;
  cfg.n_rest_trials = 1;
  auto [mi, rest] = synth_generate(cfg);
  const Recording stream = compose_continuous(mi, rest, 9, 0.0, 0.0);
  CHECK(stream.samples == mi[0].samples);
  REQUIRE(stream.markers.size() == 1);
  CHECK(stream.markers[0].label == kLabelMi);
  CHECK(stream.markers[0].onset_sample == 0);
  CHECK(stream.markers[0].duration_samples == stream.n_samples());
}

TEST_CASE("composition length depends only on the leading rest draw") {
  SynthConfig cfg;
  cfg.trial_duration_s = 1.0;  // 100-sample trials
  cfg.n_mi_trials = 2;
  cfg.n_rest_trials = 1;
  auto [mi, rest] = synth_generate(cfg);

  bool saw_250 = false, saw_300 = false;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    const Recording stream = compose_continuous(mi, rest, seed, 0.5, 0.5);
    const std::int64_t n = stream.n_samples();
    CHECK((n == 250 || n == 300));
    saw_250 |= n == 250;
    saw_300 |= n == 300;

    // Markers partition the timeline with the right labels.
    std::int64_t covered = 0;
    for (size_t i = 0; i < stream.markers.size(); ++i) {
      CHECK(stream.markers[i].onset_sample == covered);
      covered += stream.markers[i].duration_samples;
    }
    CHECK(covered == n);
  }
  CHECK(saw_250);
  CHECK(saw_300);
}

TEST_CASE("composition marker durations always partition the stream") {
  SynthConfig cfg;
  cfg.n_mi_trials = 4;
  cfg.n_rest_trials = 2;
  auto [mi, rest] = synth_generate(cfg);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Recording stream = compose_continuous(mi, rest, seed, 1.0, 3.0);
    std::int64_t covered = 0;
    for (const Marker& m : stream.markers) covered += m.duration_samples;
    CHECK(covered == stream.n_samples());
    CHECK_NOTHROW(stream.validate());
  }
}

TEST_CASE("composition rejects incompatible trials") {
  SynthConfig cfg;
  cfg.n_mi_trials = 1;
  cfg.n_rest_trials = 1;
  auto [mi, rest] = synth_generate(cfg);
  CHECK_THROWS_AS(compose_continuous({}, rest, 1, 0.0, 0.0), std::runtime_error);

  std::vector<Recording> other_rate = rest;
  other_rate[0].sample_rate_hz = 128.0;
  CHECK_THROWS_AS(compose_continuous(mi, other_rate, 1, 1.0, 1.0), std::runtime_error);
}

TEST_CASE("segment truth follows the strict overlap rule") {
  Recording rec;
  rec.sample_rate_hz = 100.0;
  rec.channels = {"a"};
  rec.samples = Eigen::MatrixXf::Zero(100, 1);
  rec.markers = {Marker{0, 20, kLabelRest}, Marker{20, 40, kLabelMi}, Marker{60, 40, kLabelRest}};

  // Segment [10, 35): 15 of 25 samples inside the task marker -> 60% > 50%.
  auto labels = interval_truth_labels(rec.markers, {10}, 25, 0.5);
  CHECK(labels[0] == kLabelMi);

  // Segment [10, 35) against rule 0.6: 60% is not strictly greater.
  labels = interval_truth_labels(rec.markers, {10}, 25, 0.6);
  CHECK(labels[0] == kLabelRest);

  // 40% overlap at rule 0.5 stays rest; full containment is task.
  labels = interval_truth_labels(rec.markers, {50, 30}, 25, 0.5);
  CHECK(labels[0] == kLabelRest);  // [50, 75): 10 of 25 inside
  CHECK(labels[1] == kLabelMi);    // [30, 55): fully inside
}

TEST_CASE("segment truth matches a per-sample counting oracle on a composed stream") {
  SynthConfig cfg;
  cfg.n_mi_trials = 3;
  cfg.n_rest_trials = 2;
  auto [mi, rest] = synth_generate(cfg);
  const Recording stream = compose_continuous(mi, rest, 5, 1.0, 2.0);

  const std::int64_t seg = 50, hop = 25;
  const auto got = segment_truth(stream, seg, hop);

  // Oracle: paint per-sample labels, then count.
  std::vector<int> is_mi(static_cast<size_t>(stream.n_samples()), 0);
  for (const Marker& m : stream.markers) {
    if (m.label != kLabelMi) continue;
    for (std::int64_t t = m.onset_sample; t < m.onset_sample + m.duration_samples; ++t) {
      is_mi[static_cast<size_t>(t)] = 1;
    }
  }
  REQUIRE(!got.empty());
  for (const SegmentLabel& s : got) {
    std::int64_t count = 0;
    for (std::int64_t t = s.segment_index * hop; t < s.segment_index * hop + seg; ++t) {
      count += is_mi[static_cast<size_t>(t)];
    }
    const bool oracle_mi = static_cast<double>(count) / seg > 0.5;
    CHECK(s.label == (oracle_mi ? kLabelMi : kLabelRest));
  }
}

TEST_CASE("segment truth rejects oversized segments") {
  SynthConfig cfg;
  cfg.n_mi_trials = 1;
  cfg.n_rest_trials = 1;
  auto [mi, rest] = synth_generate(cfg);
  CHECK_THROWS_AS(segment_truth(mi[0], mi[0].n_samples() + 1, 10), std::runtime_error);
}
