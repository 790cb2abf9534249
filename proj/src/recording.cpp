#include "mionset/recording.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "mionset/common.hpp"

namespace mionset {

namespace fs = std::filesystem;
using nlohmann::json;

void Recording::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw std::runtime_error("recording: sample_rate_hz must be positive and finite");
  }
  if (channels.empty()) {
    throw std::runtime_error("recording: channel list is empty");
  }
  if (samples.rows() < 1) {
    throw std::runtime_error("recording: needs at least one sample");
  }
  if (samples.cols() != static_cast<Eigen::Index>(channels.size())) {
    throw std::runtime_error(strfmt("recording: %d sample columns but %zu channel names",
                                    static_cast<int>(samples.cols()), channels.size()));
  }
  std::set<std::string> names(channels.begin(), channels.end());
  if (names.size() != channels.size()) {
    throw std::runtime_error("recording: duplicate channel name");
  }
  if (!samples.allFinite()) {
    throw std::runtime_error("recording: non-finite sample value");
  }
  for (const auto& [ch, neighbors] : topology) {
    if (!names.count(ch)) {
      throw std::runtime_error(strfmt("recording: topology references unknown channel '%s'", ch.c_str()));
    }
    for (const auto& nb : neighbors) {
      if (!names.count(nb)) {
        throw std::runtime_error(
            strfmt("recording: topology neighbor '%s' of '%s' is not a channel", nb.c_str(), ch.c_str()));
      }
      if (nb == ch) {
        throw std::runtime_error(strfmt("recording: channel '%s' listed as its own neighbor", ch.c_str()));
      }
    }
  }
  std::int64_t prev_end = 0;
  for (size_t i = 0; i < markers.size(); ++i) {
    const Marker& m = markers[i];
    if (m.label != kLabelMi && m.label != kLabelRest) {
      throw std::runtime_error(strfmt("recording: marker %zu has unknown label '%s'", i, m.label.c_str()));
    }
    if (m.onset_sample < 0 || m.duration_samples < 1) {
      throw std::runtime_error(strfmt("recording: marker %zu has invalid extent", i));
    }
    if (m.onset_sample + m.duration_samples > n_samples()) {
      throw std::runtime_error(strfmt("recording: marker %zu runs past the end of the data", i));
    }
    if (i > 0 && m.onset_sample < prev_end) {
      throw std::runtime_error(strfmt("recording: markers overlap or are out of order at index %zu", i));
    }
    prev_end = m.onset_sample + m.duration_samples;
  }
}

namespace {

fs::path strip_known_extension(const fs::path& base) {
  fs::path p = base;
  std::string ext = p.extension().string();
  if (ext == ".json" || ext == ".f32") {
    p.replace_extension();
  }
  return p;
}

}  // namespace

Recording load_recording(const fs::path& base) {
  fs::path stem = strip_known_extension(base);
  fs::path meta_path = stem;
  meta_path += ".json";
  fs::path data_path = stem;
  data_path += ".f32";

  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(strfmt("%s: %s", meta_path.string().c_str(), e.what()));
  }

  Recording rec;
  rec.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  rec.channels = meta.at("channels").get<std::vector<std::string>>();
  const std::int64_t n_samples = meta.at("n_samples").get<std::int64_t>();
  if (meta.contains("topology")) {
    rec.topology = meta.at("topology").get<std::map<std::string, std::vector<std::string>>>();
  }
  if (meta.contains("markers")) {
    for (const auto& jm : meta.at("markers")) {
      Marker m;
      m.onset_sample = jm.at("onset_sample").get<std::int64_t>();
      m.duration_samples = jm.at("duration_samples").get<std::int64_t>();
      m.label = jm.at("label").get<std::string>();
      rec.markers.push_back(std::move(m));
    }
  }

  std::vector<float> payload = read_f32_file(data_path);
  const std::int64_t n_channels = static_cast<std::int64_t>(rec.channels.size());
  if (static_cast<std::int64_t>(payload.size()) != n_samples * n_channels) {
    throw std::runtime_error(strfmt("%s: sample-count mismatch: header says %lld x %lld but payload holds %zu values",
                                    data_path.string().c_str(), static_cast<long long>(n_samples),
                                    static_cast<long long>(n_channels), payload.size()));
  }
  rec.samples.resize(n_samples, n_channels);
  for (std::int64_t t = 0; t < n_samples; ++t) {
    for (std::int64_t c = 0; c < n_channels; ++c) {
      rec.samples(t, c) = payload[static_cast<size_t>(t * n_channels + c)];
    }
  }
  rec.validate();
  return rec;
}

void save_recording(const Recording& rec, const fs::path& base) {
  rec.validate();
  fs::path stem = strip_known_extension(base);

  json meta;
  meta["sample_rate_hz"] = rec.sample_rate_hz;
  meta["n_samples"] = rec.n_samples();
  meta["channels"] = rec.channels;
  meta["topology"] = rec.topology;
  json jmarkers = json::array();
  for (const Marker& m : rec.markers) {
    jmarkers.push_back({{"onset_sample", m.onset_sample},
                        {"duration_samples", m.duration_samples},
                        {"label", m.label}});
  }
  meta["markers"] = jmarkers;

  fs::path meta_path = stem;
  meta_path += ".json";
  write_file_atomic(meta_path, meta.dump(2) + "\n");

  std::vector<float> payload(static_cast<size_t>(rec.n_samples()) * rec.n_channels());
  for (std::int64_t t = 0; t < rec.n_samples(); ++t) {
    for (int c = 0; c < rec.n_channels(); ++c) {
      payload[static_cast<size_t>(t * rec.n_channels() + c)] = rec.samples(t, c);
    }
  }
  fs::path data_path = stem;
  data_path += ".f32";
  write_f32_file(data_path, payload);
}

}  // namespace mionset
