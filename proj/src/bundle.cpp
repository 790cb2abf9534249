#include <cstddef>

#include "mionset/common.hpp"
#include "mionset/pipeline.hpp"

namespace mionset {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd json_to_matrix(const json& j, const char* name) {
  if (!j.is_array()) throw std::runtime_error(strfmt("bundle: %s must be an array of rows", name));
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (!row.is_array()) throw std::runtime_error(strfmt("bundle: %s row %lld is not an array", name, (long long)r));
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::runtime_error(strfmt("bundle: %s rows have unequal lengths", name));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  if (rows == 0) m.resize(0, 0);
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd json_to_vector(const json& j, const char* name) {
  if (!j.is_array()) throw std::runtime_error(strfmt("bundle: %s must be an array", name));
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

void append_matrix(std::vector<float>& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
}

void append_vector(std::vector<float>& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(static_cast<float>(v(i)));
}

struct F32Cursor {
  const std::vector<float>& data;
  size_t pos = 0;

  Eigen::MatrixXd take_matrix(Eigen::Index rows, Eigen::Index cols, const char* what) {
    const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols);
    if (pos + n > data.size()) throw std::runtime_error(strfmt("bundle: weight file truncated at %s", what));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<double>(data[pos++]);
    return m;
  }

  Eigen::VectorXd take_vector(Eigen::Index n, const char* what) {
    if (pos + static_cast<size_t>(n) > data.size())
      throw std::runtime_error(strfmt("bundle: weight file truncated at %s", what));
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<double>(data[pos++]);
    return v;
  }
};

std::vector<float> flatten_model(const EdModel& m) {
  std::vector<float> out;
  const size_t total = 2 * (static_cast<size_t>(m.encoder.wx.size()) + m.encoder.wh.size() + m.encoder.b.size()) +
                       m.dense_w.size() + m.dense_b.size();
  out.reserve(total);
  append_matrix(out, m.encoder.wx);
  append_matrix(out, m.encoder.wh);
  append_vector(out, m.encoder.b);
  append_matrix(out, m.decoder.wx);
  append_matrix(out, m.decoder.wh);
  append_vector(out, m.decoder.b);
  append_matrix(out, m.dense_w);
  append_vector(out, m.dense_b);
  return out;
}

EdModel unflatten_model(const std::vector<float>& data, int v, int hidden, int input_len, int output_len,
                        int pair_id) {
  F32Cursor cur{data};
  EdModel m;
  m.encoder.wx = cur.take_matrix(4 * hidden, v, "encoder.wx");
  m.encoder.wh = cur.take_matrix(4 * hidden, hidden, "encoder.wh");
  m.encoder.b = cur.take_vector(4 * hidden, "encoder.b");
  m.decoder.wx = cur.take_matrix(4 * hidden, v, "decoder.wx");
  m.decoder.wh = cur.take_matrix(4 * hidden, hidden, "decoder.wh");
  m.decoder.b = cur.take_vector(4 * hidden, "decoder.b");
  m.dense_w = cur.take_matrix(v, hidden, "dense_w");
  m.dense_b = cur.take_vector(v, "dense_b");
  if (cur.pos != data.size()) {
    throw std::runtime_error(strfmt("bundle: weight file for pair %d has %zu trailing values", pair_id,
                                    data.size() - cur.pos));
  }
  m.input_len = input_len;
  m.output_len = output_len;
  m.v = v;
  m.hidden_size = hidden;
  m.pair_id = pair_id;
  m.validate();
  return m;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
  if (bundle.bank.empty()) throw std::runtime_error("bundle: empty model bank");
  const EdModel& first = bundle.bank.front();

  json j;
  j["config"] = config_to_json(bundle.config);
  j["pca"] = {{"mean", vector_to_json(bundle.pca.mean)},
              {"components", matrix_to_json(bundle.pca.components)},
              {"eigenvalues", vector_to_json(bundle.pca.eigenvalues)},
              {"explained_fraction", bundle.pca.explained_fraction},
              {"m_prime", bundle.pca.m_prime}};
  j["cwt"] = {{"q", bundle.cwt.q},
              {"omega0", bundle.cwt.omega0},
              {"scale_center_freqs_hz", bundle.cwt.scale_center_freqs_hz}};
  j["codebook"] = {{"v", bundle.codebook.v},
                   {"channels", bundle.codebook.channels},
                   {"scales", bundle.codebook.scales},
                   {"lo", matrix_to_json(bundle.codebook.lo)},
                   {"hi", matrix_to_json(bundle.codebook.hi)}};
  j["model"] = {{"pairs", static_cast<int>(bundle.bank.size())},
                {"v", first.v},
                {"hidden_size", first.hidden_size},
                {"input_len", first.input_len},
                {"output_len", first.output_len}};
  if (bundle.threshold) {
    j["threshold"] = *bundle.threshold;
  } else {
    j["threshold"] = nullptr;
  }

  for (size_t i = 0; i < bundle.bank.size(); ++i) {
    const EdModel& m = bundle.bank[i];
    if (m.v != first.v || m.hidden_size != first.hidden_size || m.input_len != first.input_len ||
        m.output_len != first.output_len) {
      throw std::runtime_error("bundle: model bank is not homogeneous");
    }
    write_f32_file(dir / strfmt("ed_%zu.f32", i), flatten_model(m));
  }
  write_file_atomic(dir / "bundle.json", j.dump(2) + "\n");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "bundle.json"));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(strfmt("%s: %s", (dir / "bundle.json").string().c_str(), e.what()));
  }

  ModelBundle bundle;
  bundle.config = config_from_json(j.at("config"));

  const json& p = j.at("pca");
  bundle.pca.mean = json_to_vector(p.at("mean"), "pca.mean");
  bundle.pca.components = json_to_matrix(p.at("components"), "pca.components");
  bundle.pca.eigenvalues = json_to_vector(p.at("eigenvalues"), "pca.eigenvalues");
  bundle.pca.explained_fraction = p.at("explained_fraction").get<double>();
  bundle.pca.m_prime = p.at("m_prime").get<int>();
  if (bundle.pca.components.cols() != bundle.pca.m_prime) {
    throw std::runtime_error("bundle: pca.components column count disagrees with m_prime");
  }

  const json& c = j.at("cwt");
  bundle.cwt.q = c.at("q").get<int>();
  bundle.cwt.omega0 = c.at("omega0").get<double>();
  bundle.cwt.scale_center_freqs_hz = c.at("scale_center_freqs_hz").get<std::vector<double>>();
  if (static_cast<int>(bundle.cwt.scale_center_freqs_hz.size()) != bundle.cwt.q) {
    throw std::runtime_error("bundle: cwt scale count disagrees with q");
  }

  const json& cb = j.at("codebook");
  bundle.codebook.v = cb.at("v").get<int>();
  bundle.codebook.channels = cb.at("channels").get<int>();
  bundle.codebook.scales = cb.at("scales").get<int>();
  bundle.codebook.lo = json_to_matrix(cb.at("lo"), "codebook.lo");
  bundle.codebook.hi = json_to_matrix(cb.at("hi"), "codebook.hi");
  bundle.codebook.validate();

  const json& m = j.at("model");
  const int pairs = m.at("pairs").get<int>();
  const int v = m.at("v").get<int>();
  const int hidden = m.at("hidden_size").get<int>();
  const int input_len = m.at("input_len").get<int>();
  const int output_len = m.at("output_len").get<int>();
  if (pairs != bundle.codebook.channels * bundle.codebook.scales) {
    throw std::runtime_error("bundle: pair count disagrees with codebook dimensions");
  }

  bundle.bank.reserve(pairs);
  for (int i = 0; i < pairs; ++i) {
    const std::vector<float> data = read_f32_file(dir / strfmt("ed_%d.f32", i));
    bundle.bank.push_back(unflatten_model(data, v, hidden, input_len, output_len, i));
  }

  const json& th = j.at("threshold");
  if (!th.is_null()) bundle.threshold = th.get<double>();
  return bundle;
}

}  // namespace mionset
