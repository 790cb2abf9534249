#include <cmath>
#include <set>

#include "mionset/common.hpp"
#include "mionset/pipeline.hpp"

namespace mionset {

using nlohmann::json;

namespace {

int seconds_to_samples(double seconds, double rate, const char* field) {
  const double exact = seconds * rate;
  const long long rounded = std::llround(exact);
  if (rounded < 1) {
    throw std::runtime_error(strfmt("%s: %g s is shorter than one sample at %g Hz", field, seconds, rate));
  }
  if (std::abs(rounded - exact) > 0.01 * exact) {
    throw std::runtime_error(strfmt("%s: %g s rounds to %lld samples at %g Hz, off by more than 1%%",
                                    field, seconds, rounded, rate));
  }
  return static_cast<int>(rounded);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      throw std::runtime_error(strfmt("unknown config key '%s'", path.c_str()));
    }
    (void)value;
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

int PipelineConfig::input_len() const { return seconds_to_samples(input_len_s, sample_rate_hz, "input_len_s"); }
int PipelineConfig::output_len() const { return seconds_to_samples(output_len_s, sample_rate_hz, "output_len_s"); }
int PipelineConfig::hop() const {
  const double h = hop_s < 0 ? output_len_s : hop_s;
  return seconds_to_samples(h, sample_rate_hz, "hop_s");
}

void PipelineConfig::validate() const {
  if (!(sample_rate_hz > 0)) throw std::runtime_error("sample_rate_hz must be positive");
  if (bandpass.low_hz >= bandpass.high_hz) {
    throw std::runtime_error("bandpass.low_hz must be < high_hz");
  }
  bandpass.validate(sample_rate_hz);
  if (!(pca_retention > 0) || pca_retention > 1) {
    throw std::runtime_error("pca_retention must lie in (0, 1]");
  }
  if (q < 1) throw std::runtime_error("q must be >= 1");
  if (v < 2) throw std::runtime_error("v must be >= 2");
  input_len();
  output_len();
  hop();
  train.validate();
  if (detector.neighbor_votes < 0 || detector.neighbor_votes % 2 != 0) {
    throw std::runtime_error("detector.neighbor_votes must be even and >= 0");
  }
  if (detector.tuning_mode != "percentile" && detector.tuning_mode != "f1") {
    throw std::runtime_error("detector.tuning_mode must be 'percentile' or 'f1'");
  }
  if (!(detector.percentile_alpha >= 0) || detector.percentile_alpha > 1) {
    throw std::runtime_error("detector.percentile_alpha must lie in [0, 1]");
  }
  if (detector.folds < 2) throw std::runtime_error("detector.folds must be >= 2");
  if (!(stream.mi_train_fraction > 0) || !(stream.mi_train_fraction < 1)) {
    throw std::runtime_error("stream.mi_train_fraction must lie in (0, 1)");
  }
  if (!(stream.min_rest_s >= 0) || !(stream.max_rest_s >= stream.min_rest_s)) {
    throw std::runtime_error("stream: need 0 <= min_rest_s <= max_rest_s");
  }
  SynthConfig synth_full = synth;
  synth_full.sample_rate_hz = sample_rate_hz;
  synth_full.validate();
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw std::runtime_error("config root must be an object");

  check_keys(j, {"sample_rate_hz", "bandpass", "pca_retention", "q", "v", "input_len_s", "output_len_s",
                 "hop_s", "train", "detector", "stream", "synth"},
             "");
  read(j, "sample_rate_hz", cfg.sample_rate_hz);
  read(j, "pca_retention", cfg.pca_retention);
  read(j, "q", cfg.q);
  read(j, "v", cfg.v);
  read(j, "input_len_s", cfg.input_len_s);
  read(j, "output_len_s", cfg.output_len_s);
  read(j, "hop_s", cfg.hop_s);

  if (j.contains("bandpass")) {
    const json& b = j.at("bandpass");
    check_keys(b, {"low_hz", "high_hz", "order"}, "bandpass");
    read(b, "low_hz", cfg.bandpass.low_hz);
    read(b, "high_hz", cfg.bandpass.high_hz);
    read(b, "order", cfg.bandpass.order);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"epochs", "lambda", "hidden_size", "learning_rate", "batch_size", "teacher_forcing",
                   "l1_include_biases", "rng_seed"},
               "train");
    read(t, "epochs", cfg.train.epochs);
    read(t, "lambda", cfg.train.l1_lambda);
    read(t, "hidden_size", cfg.train.hidden_size);
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "teacher_forcing", cfg.train.teacher_forcing);
    read(t, "l1_include_biases", cfg.train.l1_include_biases);
    read(t, "rng_seed", cfg.train.rng_seed);
  }
  if (j.contains("detector")) {
    const json& d = j.at("detector");
    check_keys(d, {"neighbor_votes", "tuning_mode", "percentile_alpha", "folds"}, "detector");
    read(d, "neighbor_votes", cfg.detector.neighbor_votes);
    read(d, "tuning_mode", cfg.detector.tuning_mode);
    read(d, "percentile_alpha", cfg.detector.percentile_alpha);
    read(d, "folds", cfg.detector.folds);
  }
  if (j.contains("stream")) {
    const json& s = j.at("stream");
    check_keys(s, {"mi_train_fraction", "min_rest_s", "max_rest_s", "rng_seed"}, "stream");
    read(s, "mi_train_fraction", cfg.stream.mi_train_fraction);
    read(s, "min_rest_s", cfg.stream.min_rest_s);
    read(s, "max_rest_s", cfg.stream.max_rest_s);
    read(s, "rng_seed", cfg.stream.rng_seed);
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    check_keys(s, {"n_channels", "mi_burst_freq_hz", "mi_amplitude_gain", "noise_exponent",
                   "active_channel_fraction", "trial_duration_s", "n_mi_trials", "n_rest_trials",
                   "rng_seed"},
               "synth");
    read(s, "n_channels", cfg.synth.n_channels);
    read(s, "mi_burst_freq_hz", cfg.synth.mi_burst_freq_hz);
    read(s, "mi_amplitude_gain", cfg.synth.mi_amplitude_gain);
    read(s, "noise_exponent", cfg.synth.noise_exponent);
    read(s, "active_channel_fraction", cfg.synth.active_channel_fraction);
    read(s, "trial_duration_s", cfg.synth.trial_duration_s);
    read(s, "n_mi_trials", cfg.synth.n_mi_trials);
    read(s, "n_rest_trials", cfg.synth.n_rest_trials);
    read(s, "rng_seed", cfg.synth.rng_seed);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig parse_config_file(const std::filesystem::path& path) {
  std::string text = read_file(path);
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    PipelineConfig cfg;
    cfg.validate();
    return cfg;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(strfmt("%s: %s", path.string().c_str(), e.what()));
  }
  return config_from_json(j);
}

json config_to_json(const PipelineConfig& cfg) {
  json j;
  j["sample_rate_hz"] = cfg.sample_rate_hz;
  j["bandpass"] = {{"low_hz", cfg.bandpass.low_hz},
                   {"high_hz", cfg.bandpass.high_hz},
                   {"order", cfg.bandpass.order}};
  j["pca_retention"] = cfg.pca_retention;
  j["q"] = cfg.q;
  j["v"] = cfg.v;
  j["input_len_s"] = cfg.input_len_s;
  j["output_len_s"] = cfg.output_len_s;
  j["hop_s"] = cfg.hop_s;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"lambda", cfg.train.l1_lambda},
                {"hidden_size", cfg.train.hidden_size},
                {"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"teacher_forcing", cfg.train.teacher_forcing},
                {"l1_include_biases", cfg.train.l1_include_biases},
                {"rng_seed", cfg.train.rng_seed}};
  j["detector"] = {{"neighbor_votes", cfg.detector.neighbor_votes},
                   {"tuning_mode", cfg.detector.tuning_mode},
                   {"percentile_alpha", cfg.detector.percentile_alpha},
                   {"folds", cfg.detector.folds}};
  j["stream"] = {{"mi_train_fraction", cfg.stream.mi_train_fraction},
                 {"min_rest_s", cfg.stream.min_rest_s},
                 {"max_rest_s", cfg.stream.max_rest_s},
                 {"rng_seed", cfg.stream.rng_seed}};
  j["synth"] = {{"n_channels", cfg.synth.n_channels},
                {"mi_burst_freq_hz", cfg.synth.mi_burst_freq_hz},
                {"mi_amplitude_gain", cfg.synth.mi_amplitude_gain},
                {"noise_exponent", cfg.synth.noise_exponent},
                {"active_channel_fraction", cfg.synth.active_channel_fraction},
                {"trial_duration_s", cfg.synth.trial_duration_s},
                {"n_mi_trials", cfg.synth.n_mi_trials},
                {"n_rest_trials", cfg.synth.n_rest_trials},
                {"rng_seed", cfg.synth.rng_seed}};
  return j;
}

}  // namespace mionset
