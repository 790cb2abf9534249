#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mionset/common.hpp"
#include "mionset/pipeline.hpp"

namespace mionset {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

SynthConfig full_synth_config(const PipelineConfig& cfg) {
  SynthConfig s = cfg.synth;
  s.sample_rate_hz = cfg.sample_rate_hz;
  return s;
}

json load_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(strfmt("%s: %s", path.string().c_str(), e.what()));
  }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<float> to_f32(const std::vector<double>& values) {
  std::vector<float> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

std::vector<double> to_f64(const std::vector<float>& values) {
  return std::vector<double>(values.begin(), values.end());
}

json markers_to_json(const std::vector<Marker>& markers) {
  json arr = json::array();
  for (const Marker& m : markers) {
    arr.push_back({{"onset_sample", m.onset_sample},
                   {"duration_samples", m.duration_samples},
                   {"label", m.label}});
  }
  return arr;
}

std::vector<Marker> markers_from_json(const json& arr) {
  std::vector<Marker> markers;
  for (const json& j : arr) {
    Marker m;
    m.onset_sample = j.at("onset_sample").get<std::int64_t>();
    m.duration_samples = j.at("duration_samples").get<std::int64_t>();
    m.label = j.at("label").get<std::string>();
    markers.push_back(std::move(m));
  }
  return markers;
}

json window_meta(const WindowPair& pair, int hop) {
  json j;
  j["n_windows"] = pair.inputs.n_windows;
  j["input_len"] = pair.inputs.window_len;
  j["output_len"] = pair.targets.window_len;
  j["channels"] = pair.inputs.channels;
  j["scales"] = pair.inputs.scales;
  j["hop"] = hop;
  j["origins"] = pair.inputs.origins;
  return j;
}

void write_window_pair(const fs::path& dir, const std::string& stem, const WindowPair& pair) {
  write_f32_file(dir / (stem + "_inputs.f32"), to_f32(pair.inputs.data));
  write_f32_file(dir / (stem + "_targets.f32"), to_f32(pair.targets.data));
}

WindowPair load_window_pair(const fs::path& dir, const std::string& stem, const json& meta) {
  WindowPair pair;
  auto fill = [&](WindowTensor& wt, int len, const std::string& suffix) {
    wt.n_windows = meta.at("n_windows").get<std::int64_t>();
    wt.window_len = len;
    wt.channels = meta.at("channels").get<int>();
    wt.scales = meta.at("scales").get<int>();
    wt.origins = meta.at("origins").get<std::vector<std::int64_t>>();
    wt.data = to_f64(read_f32_file(dir / (stem + suffix + ".f32")));
    const size_t expect = static_cast<size_t>(wt.n_windows) * len * wt.channels * wt.scales;
    if (wt.data.size() != expect) {
      throw std::runtime_error(strfmt("%s%s.f32: got %zu values, dimensions promise %zu", stem.c_str(),
                                      suffix.c_str(), wt.data.size(), expect));
    }
    if (wt.origins.size() != static_cast<size_t>(wt.n_windows)) {
      throw std::runtime_error(strfmt("%s windows: origin list length disagrees with n_windows", stem.c_str()));
    }
  };
  fill(pair.inputs, meta.at("input_len").get<int>(), "_inputs");
  fill(pair.targets, meta.at("output_len").get<int>(), "_targets");
  return pair;
}

// The per-stage laplacian + bandpass chain; PCA and CWT are applied by the
// callers because they need the fitted model and spec.
Recording spatial_and_band(const Recording& rec, const BandpassSpec& spec) {
  return bandpass_filter(laplacian_filter(rec), spec);
}

CwtSpec cwt_from_config(const PipelineConfig& cfg) {
  return CwtSpec::geometric(cfg.q, cfg.bandpass.low_hz, cfg.bandpass.high_hz);
}

PcaModel pca_from_json(const json& p) {
  PcaModel model;
  auto vec = [&](const char* key) {
    const auto values = p.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())).eval();
  };
  model.mean = vec("mean");
  const json& comp = p.at("components");
  const Eigen::Index rows = static_cast<Eigen::Index>(comp.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(comp.at(0).size()) : 0;
  model.components.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) model.components(r, c) = comp.at(r).at(c).get<double>();
  model.eigenvalues = vec("eigenvalues");
  model.explained_fraction = p.at("explained_fraction").get<double>();
  model.m_prime = p.at("m_prime").get<int>();
  if (model.components.cols() != model.m_prime) {
    throw std::runtime_error("preprocess.json: pca components column count disagrees with m_prime");
  }
  return model;
}

json pca_to_json(const PcaModel& model) {
  json comp = json::array();
  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.components.cols(); ++c) row.push_back(model.components(r, c));
    comp.push_back(std::move(row));
  }
  std::vector<double> mean(model.mean.data(), model.mean.data() + model.mean.size());
  std::vector<double> eig(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  return {{"mean", mean},
          {"components", comp},
          {"eigenvalues", eig},
          {"explained_fraction", model.explained_fraction},
          {"m_prime", model.m_prime}};
}

struct PrepArtifacts {
  json meta;
  WindowPair train;
  WindowPair rest;
};

PrepArtifacts load_prep_windows(const fs::path& prep_dir) {
  PrepArtifacts prep;
  prep.meta = load_json(prep_dir / "preprocess.json");
  prep.train = load_window_pair(prep_dir, "train", prep.meta.at("train_windows"));
  prep.rest = load_window_pair(prep_dir, "rest", prep.meta.at("rest_windows"));
  return prep;
}

SeriesTensor load_stream(const fs::path& prep_dir, const json& meta) {
  const json& s = meta.at("stream");
  SeriesTensor series;
  series.time = s.at("time").get<std::int64_t>();
  series.channels = s.at("channels").get<int>();
  series.scales = s.at("scales").get<int>();
  series.data = to_f64(read_f32_file(prep_dir / "stream.f32"));
  const size_t expect = static_cast<size_t>(series.time) * series.channels * series.scales;
  if (series.data.size() != expect) {
    throw std::runtime_error(strfmt("stream.f32: got %zu values, dimensions promise %zu", series.data.size(),
                                    expect));
  }
  return series;
}

void check_prep_matches_config(const json& meta, const PipelineConfig& cfg) {
  const json& tw = meta.at("train_windows");
  if (tw.at("input_len").get<int>() != cfg.input_len() || tw.at("output_len").get<int>() != cfg.output_len() ||
      tw.at("hop").get<int>() != cfg.hop()) {
    throw std::runtime_error("preprocess artifacts disagree with config: window geometry");
  }
  if (meta.at("cwt").at("q").get<int>() != cfg.q) {
    throw std::runtime_error("preprocess artifacts disagree with config: q");
  }
  if (meta.at("sample_rate_hz").get<double>() != cfg.sample_rate_hz) {
    throw std::runtime_error("preprocess artifacts disagree with config: sample_rate_hz");
  }
}

std::string csv_cell(const std::optional<double>& v) { return v ? strfmt("%.6f", *v) : std::string("NA"); }

}  // namespace

void run_synth(const PipelineConfig& cfg, const fs::path& data_dir) {
  cfg.validate();
  const SynthConfig synth = full_synth_config(cfg);
  auto [mi_trials, rest_trials] = synth_generate(synth);

  json manifest;
  manifest["mi"] = json::array();
  manifest["rest"] = json::array();
  for (size_t i = 0; i < mi_trials.size(); ++i) {
    const std::string name = strfmt("mi_%03zu", i);
    save_recording(mi_trials[i], data_dir / name);
    manifest["mi"].push_back(name);
  }
  for (size_t i = 0; i < rest_trials.size(); ++i) {
    const std::string name = strfmt("rest_%03zu", i);
    save_recording(rest_trials[i], data_dir / name);
    manifest["rest"].push_back(name);
  }
  write_json(data_dir / "manifest.json", manifest);
}

void run_preprocess(const PipelineConfig& cfg, const fs::path& data_dir, const fs::path& prep_dir) {
  cfg.validate();
  const json manifest = load_json(data_dir / "manifest.json");
  auto load_set = [&](const char* key) {
    std::vector<Recording> recs;
    for (const std::string& name : manifest.at(key).get<std::vector<std::string>>()) {
      recs.push_back(load_recording(data_dir / name));
    }
    return recs;
  };
  const std::vector<Recording> mi_raw = load_set("mi");
  const std::vector<Recording> rest_raw = load_set("rest");
  if (mi_raw.size() < 2) throw std::runtime_error("preprocess: need at least 2 task trials to split");
  if (rest_raw.empty()) throw std::runtime_error("preprocess: need at least 1 rest trial");

  const auto n_mi = static_cast<std::int64_t>(mi_raw.size());
  const std::int64_t n_train = std::clamp<std::int64_t>(
      std::llround(cfg.stream.mi_train_fraction * static_cast<double>(n_mi)), 1, n_mi - 1);

  // Spatial + band filtering per trial; PCA is fitted on the training split only.
  std::vector<Recording> train_filtered;
  for (std::int64_t i = 0; i < n_train; ++i) train_filtered.push_back(spatial_and_band(mi_raw[i], cfg.bandpass));
  const PcaModel pca = pca_fit(train_filtered, cfg.pca_retention);
  const CwtSpec cwt = cwt_from_config(cfg);
  cwt.validate(cfg.bandpass.low_hz, cfg.bandpass.high_hz);

  const int li = cfg.input_len();
  const int lo = cfg.output_len();
  const int hop = cfg.hop();

  // Windows are cut per trial so none straddles a trial boundary.
  auto windows_of = [&](const std::vector<Recording>& filtered) {
    WindowPair acc;
    for (const Recording& rec : filtered) {
      const SeriesTensor series = cwt_decompose(pca_project(rec, pca), cwt);
      WindowPair w = make_windows(series, li, lo, hop);
      if (acc.inputs.n_windows == 0) {
        acc = std::move(w);
      } else {
        acc.inputs.data.insert(acc.inputs.data.end(), w.inputs.data.begin(), w.inputs.data.end());
        acc.targets.data.insert(acc.targets.data.end(), w.targets.data.begin(), w.targets.data.end());
        acc.inputs.origins.insert(acc.inputs.origins.end(), w.inputs.origins.begin(), w.inputs.origins.end());
        acc.targets.origins.insert(acc.targets.origins.end(), w.targets.origins.begin(),
                                   w.targets.origins.end());
        acc.inputs.n_windows += w.inputs.n_windows;
        acc.targets.n_windows += w.targets.n_windows;
      }
    }
    return acc;
  };
  const WindowPair train_windows = windows_of(train_filtered);

  std::vector<Recording> rest_filtered;
  for (const Recording& rec : rest_raw) rest_filtered.push_back(spatial_and_band(rec, cfg.bandpass));
  const WindowPair rest_windows = windows_of(rest_filtered);

  // Held-out task trials plus cycled rest material form the continuous stream.
  std::vector<Recording> mi_test(mi_raw.begin() + n_train, mi_raw.end());
  const Recording stream_raw = compose_continuous(mi_test, rest_raw, cfg.stream.rng_seed,
                                                  cfg.stream.min_rest_s, cfg.stream.max_rest_s);
  const Recording stream_filtered = spatial_and_band(stream_raw, cfg.bandpass);
  const SeriesTensor stream = cwt_decompose(pca_project(stream_filtered, pca), cwt);

  json meta;
  meta["sample_rate_hz"] = cfg.sample_rate_hz;
  meta["bandpass"] = {{"low_hz", cfg.bandpass.low_hz},
                      {"high_hz", cfg.bandpass.high_hz},
                      {"order", cfg.bandpass.order}};
  meta["pca"] = pca_to_json(pca);
  meta["cwt"] = {{"q", cwt.q}, {"omega0", cwt.omega0}, {"scale_center_freqs_hz", cwt.scale_center_freqs_hz}};
  meta["split"] = {{"mi_train", n_train}, {"mi_test", n_mi - n_train}, {"rest", rest_raw.size()}};
  meta["train_windows"] = window_meta(train_windows, hop);
  meta["rest_windows"] = window_meta(rest_windows, hop);
  meta["stream"] = {{"time", stream.time},
                    {"channels", stream.channels},
                    {"scales", stream.scales},
                    {"markers", markers_to_json(stream_raw.markers)}};

  write_window_pair(prep_dir, "train", train_windows);
  write_window_pair(prep_dir, "rest", rest_windows);
  write_f32_file(prep_dir / "stream.f32", to_f32(stream.data));
  write_json(prep_dir / "preprocess.json", meta);
}

void run_train(const PipelineConfig& cfg, const fs::path& prep_dir, const fs::path& bundle_dir, int workers) {
  cfg.validate();
  PrepArtifacts prep = load_prep_windows(prep_dir);
  check_prep_matches_config(prep.meta, cfg);

  ModelBundle bundle;
  bundle.config = cfg;
  bundle.pca = pca_from_json(prep.meta.at("pca"));
  bundle.cwt.q = prep.meta.at("cwt").at("q").get<int>();
  bundle.cwt.omega0 = prep.meta.at("cwt").at("omega0").get<double>();
  bundle.cwt.scale_center_freqs_hz = prep.meta.at("cwt").at("scale_center_freqs_hz").get<std::vector<double>>();

  bundle.codebook = fit_codebook(prep.train, cfg.v);
  const BankDataset bank_data = quantize_bank(prep.train, bundle.codebook);
  bundle.bank = train_bank(bank_data, cfg.train, workers);
  save_bundle(bundle, bundle_dir);
}

double run_tune(const PipelineConfig& cfg, const fs::path& prep_dir, const fs::path& bundle_dir, int workers) {
  cfg.validate();
  ModelBundle bundle = load_bundle(bundle_dir);
  PrepArtifacts prep = load_prep_windows(prep_dir);
  check_prep_matches_config(prep.meta, bundle.config);

  const BankDataset train_data = quantize_bank(prep.train, bundle.codebook);
  const bool f1_mode = cfg.detector.tuning_mode == "f1";
  BankDataset rest_data;
  if (f1_mode) rest_data = quantize_bank(prep.rest, bundle.codebook);

  // Fold retraining reuses the bundle's own training recipe; the cfg argument
  // only chooses the tuning policy.
  const TuneResult result = tune_threshold(train_data, bundle.codebook, bundle.config.train,
                                           f1_mode ? TuningMode::f1 : TuningMode::percentile,
                                           cfg.detector.folds, cfg.detector.percentile_alpha,
                                           f1_mode ? &rest_data : nullptr, workers);
  bundle.threshold = result.s_th;
  bundle.config.detector = cfg.detector;
  save_bundle(bundle, bundle_dir);
  return result.s_th;
}

std::vector<SegmentDecision> run_detect(const fs::path& prep_dir, const fs::path& bundle_dir,
                                        const fs::path& decisions_csv) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  if (!bundle.threshold) throw std::runtime_error("threshold not tuned");

  const json meta = load_json(prep_dir / "preprocess.json");
  check_prep_matches_config(meta, bundle.config);
  const SeriesTensor stream = load_stream(prep_dir, meta);
  if (stream.channels != bundle.codebook.channels || stream.scales != bundle.codebook.scales) {
    throw std::runtime_error("detect: stream dimensions disagree with the model bundle");
  }

  DetectorConfig dcfg;
  dcfg.s_th = *bundle.threshold;
  dcfg.input_len = bundle.config.input_len();
  dcfg.output_len = bundle.config.output_len();
  dcfg.hop = bundle.config.hop();
  dcfg.neighbor_votes = bundle.config.detector.neighbor_votes;

  std::vector<SegmentDecision> decisions = detect_stream(stream, bundle.bank, bundle.codebook, dcfg);
  write_decisions_csv(decisions_csv, decisions);
  return decisions;
}

EvalPair run_evaluate(const fs::path& prep_dir, const fs::path& bundle_dir, const fs::path& decisions_csv,
                      const fs::path& report_dir) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  const json meta = load_json(prep_dir / "preprocess.json");
  const std::vector<Marker> markers = markers_from_json(meta.at("stream").at("markers"));
  const std::vector<SegmentDecision> decisions = load_decisions_csv(decisions_csv);
  if (decisions.empty()) throw std::runtime_error("evaluate: decision file is empty");

  std::vector<std::int64_t> starts;
  std::vector<std::string> raw_pred, corrected_pred;
  for (const SegmentDecision& d : decisions) {
    starts.push_back(d.start_sample);
    raw_pred.push_back(d.raw_label);
    corrected_pred.push_back(d.corrected_label);
  }
  const int lo = bundle.config.output_len();
  const std::vector<std::string> truth = interval_truth_labels(markers, starts, lo, 0.5);

  EvalPair pair;
  pair.raw = compute_metrics(confusion_counts(raw_pred, truth));
  pair.raw.output_len = lo;
  pair.raw.neighbor_votes = 0;
  pair.raw.s_th = bundle.threshold.value_or(0.0);
  pair.corrected = compute_metrics(confusion_counts(corrected_pred, truth));
  pair.corrected.output_len = lo;
  pair.corrected.neighbor_votes = bundle.config.detector.neighbor_votes;
  pair.corrected.s_th = bundle.threshold.value_or(0.0);

  write_file_atomic(report_dir / "report_raw.json", report_json(pair.raw));
  write_file_atomic(report_dir / "report_raw.csv", report_csv(pair.raw));
  write_file_atomic(report_dir / "report_corrected.json", report_json(pair.corrected));
  write_file_atomic(report_dir / "report_corrected.csv", report_csv(pair.corrected));
  return pair;
}

EvalPair run_pipeline(const PipelineConfig& cfg, const fs::path& root, int workers) {
  run_synth(cfg, root / "data");
  run_preprocess(cfg, root / "data", root / "prep");
  run_train(cfg, root / "prep", root / "bundle", workers);
  run_tune(cfg, root / "prep", root / "bundle", workers);
  run_detect(root / "prep", root / "bundle", root / "decisions.csv");
  return run_evaluate(root / "prep", root / "bundle", root / "decisions.csv", root);
}

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const std::vector<int>& hidden_sizes,
                                const std::vector<double>& output_lens, const fs::path& root, int workers) {
  const std::vector<int> hs = hidden_sizes.empty() ? std::vector<int>{cfg.train.hidden_size} : hidden_sizes;
  const std::vector<double> lens =
      output_lens.empty() ? std::vector<double>{cfg.output_len_s} : output_lens;

  std::vector<SweepRow> rows;
  for (double len : lens) {
    for (int nh : hs) {
      PipelineConfig sub = cfg;
      sub.output_len_s = len;
      sub.hop_s = -1.0;  // hop tracks the decoder length across the grid
      sub.train.hidden_size = nh;
      sub.validate();
      const fs::path dir = root / "sweep" / strfmt("o%d_h%d", sub.output_len(), nh);
      SweepRow row;
      row.output_len_s = len;
      row.hidden_size = nh;
      row.eval = run_pipeline(sub, dir, workers);
      rows.push_back(std::move(row));
    }
  }

  std::string csv =
      "output_len_s,hidden_size,"
      "raw_precision,raw_tpr,raw_tnr,raw_fpr,raw_fnr,raw_f1,"
      "corr_precision,corr_tpr,corr_tnr,corr_fpr,corr_fnr,corr_f1\n";
  for (const SweepRow& row : rows) {
    csv += strfmt("%.6f,%d", row.output_len_s, row.hidden_size);
    const EvalReport* reports[2] = {&row.eval.raw, &row.eval.corrected};
    for (const EvalReport* r : reports) {
      csv += "," + csv_cell(r->precision) + "," + csv_cell(r->tpr) + "," + csv_cell(r->tnr) + "," +
             csv_cell(r->fpr) + "," + csv_cell(r->fnr) + "," + csv_cell(r->f1);
    }
    csv += "\n";
  }
  write_file_atomic(root / "sweep.csv", csv);
  return rows;
}

}  // namespace mionset
