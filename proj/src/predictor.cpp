#include "mionset/predictor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "mionset/common.hpp"

namespace mionset {

void EdModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (v < 2 || hidden_size < 1 || input_len < 1 || output_len < 1) {
    throw std::runtime_error("ed: invalid dimensions");
  }
  if (encoder.input_size() != v || encoder.hidden_size() != hidden_size ||
      decoder.input_size() != v || decoder.hidden_size() != hidden_size) {
    throw std::runtime_error("ed: cell shapes disagree with model dimensions");
  }
  if (dense_w.rows() != v || dense_w.cols() != hidden_size || dense_b.size() != v) {
    throw std::runtime_error("ed: dense layer shape mismatch");
  }
  if (!dense_w.allFinite() || !dense_b.allFinite()) {
    throw std::runtime_error("ed: non-finite dense parameter");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::runtime_error("train: epochs must be >= 1");
  if (!(l1_lambda >= 0)) throw std::runtime_error("train: lambda must be >= 0");
  if (hidden_size < 1) throw std::runtime_error("train: hidden_size must be >= 1");
  if (!(learning_rate > 0)) throw std::runtime_error("train: learning_rate must be positive");
  if (batch_size < 1) throw std::runtime_error("train: batch_size must be >= 1");
}

BankDataset quantize_bank(const WindowPair& windows, const Codebook& cb) {
  cb.validate();
  const WindowTensor& in = windows.inputs;
  if (in.channels != cb.channels || in.scales != cb.scales) {
    throw std::runtime_error("bank: codebook and windows disagree on the pair grid");
  }
  BankDataset bank;
  bank.channels = in.channels;
  bank.scales = in.scales;
  bank.v = cb.v;
  for (int c = 0; c < in.channels; ++c) {
    for (int s = 0; s < in.scales; ++s) {
      SequenceDataset ds;
      ds.inputs = quantize_windows(windows.inputs, c, s, cb);
      ds.targets = quantize_windows(windows.targets, c, s, cb);
      ds.v = cb.v;
      bank.pairs.push_back(std::move(ds));
    }
  }
  return bank;
}

namespace {

double uniform_symmetric(std::mt19937_64& rng, double bound) {
  return std::uniform_real_distribution<double>(-bound, bound)(rng);
}

void fill_rowmajor(Eigen::MatrixXd& m, std::mt19937_64& rng, double bound) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform_symmetric(rng, bound);
  }
}

void fill_vector(Eigen::VectorXd& v, std::mt19937_64& rng, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = uniform_symmetric(rng, bound);
}

}  // namespace

EdModel init_ed_model(int v, int hidden_size, int input_len, int output_len, int pair_id,
                      std::uint64_t seed) {
  if (v < 2 || hidden_size < 1 || input_len < 1 || output_len < 1) {
    throw std::runtime_error("ed: invalid dimensions");
  }
  EdModel m;
  m.v = v;
  m.hidden_size = hidden_size;
  m.input_len = input_len;
  m.output_len = output_len;
  m.pair_id = pair_id;

  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  auto init_cell = [&](LstmCell& cell) {
    cell.wx.resize(4 * hidden_size, v);
    cell.wh.resize(4 * hidden_size, hidden_size);
    cell.b.resize(4 * hidden_size);
    fill_rowmajor(cell.wx, rng, bound);
    fill_rowmajor(cell.wh, rng, bound);
    fill_vector(cell.b, rng, bound);
  };
  init_cell(m.encoder);
  init_cell(m.decoder);
  m.dense_w.resize(v, hidden_size);
  m.dense_b.resize(v);
  fill_rowmajor(m.dense_w, rng, bound);
  fill_vector(m.dense_b, rng, bound);
  return m;
}

namespace {

inline void sigmoid_inplace(Eigen::MatrixXd& m) {
  m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// Cached activations of one cell unrolled over `steps` steps on a batch.
// States are indexed 0..steps with index 0 holding the initial state.
struct CellTrace {
  std::vector<Eigen::MatrixXd> i, f, g, o;  // per step, [H x B]
  std::vector<Eigen::MatrixXd> h, c;        // per state, [H x B]
};

// One batched cell step. `levels` supplies the one-hot input column per batch
// member; level -1 means the zero vector (the decoder's first input).
void cell_forward_step(const LstmCell& cell, const Eigen::VectorXi& levels,
                       const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
                       Eigen::MatrixXd& i, Eigen::MatrixXd& f, Eigen::MatrixXd& g, Eigen::MatrixXd& o,
                       Eigen::MatrixXd& h, Eigen::MatrixXd& c) {
  const int hs = cell.hidden_size();
  Eigen::MatrixXd z = cell.wh * h_prev;
  z.colwise() += cell.b;
  for (Eigen::Index col = 0; col < levels.size(); ++col) {
    if (levels[col] >= 0) z.col(col) += cell.wx.col(levels[col]);
  }
  i = z.topRows(hs);
  sigmoid_inplace(i);
  f = z.middleRows(hs, hs);
  sigmoid_inplace(f);
  g = z.middleRows(2 * hs, hs).array().tanh().matrix();
  o = z.bottomRows(hs);
  sigmoid_inplace(o);
  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
}

// Reverse-mode step. dh/dc carry the accumulated gradients w.r.t. this step's
// outputs; on return they hold the gradients w.r.t. the previous state.
void cell_backward_step(const LstmCell& cell, const Eigen::VectorXi& levels,
                        const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
                        const Eigen::MatrixXd& i, const Eigen::MatrixXd& f, const Eigen::MatrixXd& g,
                        const Eigen::MatrixXd& o, const Eigen::MatrixXd& c, Eigen::MatrixXd& dh,
                        Eigen::MatrixXd& dc, Eigen::MatrixXd& grad_wx, Eigen::MatrixXd& grad_wh,
                        Eigen::VectorXd& grad_b) {
  const int hs = cell.hidden_size();
  Eigen::MatrixXd tc = c.array().tanh().matrix();
  Eigen::MatrixXd dO = dh.cwiseProduct(tc);
  dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
  Eigen::MatrixXd dI = dc.cwiseProduct(g);
  Eigen::MatrixXd dF = dc.cwiseProduct(c_prev);
  Eigen::MatrixXd dG = dc.cwiseProduct(i);
  Eigen::MatrixXd dc_prev = dc.cwiseProduct(f);

  Eigen::MatrixXd dz(4 * hs, dh.cols());
  dz.topRows(hs) = dI.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
  dz.middleRows(hs, hs) = dF.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
  dz.middleRows(2 * hs, hs) = dG.cwiseProduct((1.0 - g.array().square()).matrix());
  dz.bottomRows(hs) = dO.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());

  grad_wh.noalias() += dz * h_prev.transpose();
  grad_b += dz.rowwise().sum();
  for (Eigen::Index col = 0; col < levels.size(); ++col) {
    if (levels[col] >= 0) grad_wx.col(levels[col]) += dz.col(col);
  }
  dh.noalias() = cell.wh.transpose() * dz;
  dc = std::move(dc_prev);
}

void softmax_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    Eigen::VectorXd e = (m.col(col).array() - m.col(col).maxCoeff()).exp();
    m.col(col) = e / e.sum();
  }
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& col) {
  int best = 0;
  double best_val = col[0];
  for (int r = 1; r < col.size(); ++r) {
    if (col[r] > best_val) {
      best_val = col[r];
      best = r;
    }
  }
  return best;
}

}  // namespace

void EdGradients::resize_like(const EdModel& model) {
  enc_wx.resizeLike(model.encoder.wx);
  enc_wh.resizeLike(model.encoder.wh);
  enc_b.resizeLike(model.encoder.b);
  dec_wx.resizeLike(model.decoder.wx);
  dec_wh.resizeLike(model.decoder.wh);
  dec_b.resizeLike(model.decoder.b);
  dense_w.resizeLike(model.dense_w);
  dense_b.resizeLike(model.dense_b);
}

void EdGradients::set_zero() {
  enc_wx.setZero();
  enc_wh.setZero();
  enc_b.setZero();
  dec_wx.setZero();
  dec_wh.setZero();
  dec_b.setZero();
  dense_w.setZero();
  dense_b.setZero();
}

double l1_weight_sum(const EdModel& model, bool include_biases) {
  double sum = model.encoder.wx.cwiseAbs().sum() + model.encoder.wh.cwiseAbs().sum() +
               model.decoder.wx.cwiseAbs().sum() + model.decoder.wh.cwiseAbs().sum() +
               model.dense_w.cwiseAbs().sum();
  if (include_biases) {
    sum += model.encoder.b.cwiseAbs().sum() + model.decoder.b.cwiseAbs().sum() +
           model.dense_b.cwiseAbs().sum();
  }
  return sum;
}

std::pair<double, double> compute_loss(const EdModel& model, const std::vector<Eigen::MatrixXd>& probs,
                                       const Eigen::MatrixXi& target_levels, double lambda,
                                       bool include_biases) {
  if (static_cast<int>(probs.size()) != target_levels.rows()) {
    throw std::runtime_error("loss: probs step count disagrees with targets");
  }
  const Eigen::Index batch = target_levels.cols();
  double q = 0.0;
  for (size_t step = 0; step < probs.size(); ++step) {
    const Eigen::MatrixXd& p = probs[step];
    if (p.cols() != batch || p.rows() != model.v) throw std::runtime_error("loss: probs shape mismatch");
    for (Eigen::Index col = 0; col < batch; ++col) {
      const double sum = p.col(col).sum();
      if (std::abs(sum - 1.0) > 1e-4) {
        throw std::runtime_error(strfmt("loss: probability column sums to %.8f, not 1", sum));
      }
      const int level = target_levels(static_cast<Eigen::Index>(step), col);
      if (level < 0 || level >= model.v) throw std::runtime_error("loss: target level out of range");
      q -= std::log(std::max(p(level, col), 1e-12));
    }
  }
  q /= static_cast<double>(batch) * static_cast<double>(probs.size());
  return {q, lambda * l1_weight_sum(model, include_biases)};
}

BatchPrediction predict_batch(const EdModel& model, const Eigen::MatrixXi& input_levels) {
  model.validate();
  if (input_levels.rows() != model.input_len) {
    throw std::runtime_error(strfmt("predict: expected %d input steps, got %d", model.input_len,
                                    static_cast<int>(input_levels.rows())));
  }
  const Eigen::Index batch = input_levels.cols();
  if (batch < 1) throw std::runtime_error("predict: empty batch");
  if ((input_levels.array() < 0).any() || (input_levels.array() >= model.v).any()) {
    throw std::runtime_error("predict: input level out of range");
  }
  const int hs = model.hidden_size;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hs, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hs, batch);
  Eigen::MatrixXd i, f, g, o, h_next, c_next;
  for (int t = 0; t < model.input_len; ++t) {
    cell_forward_step(model.encoder, input_levels.row(t).transpose(), h, c, i, f, g, o, h_next, c_next);
    h = h_next;
    c = c_next;
  }

  BatchPrediction out;
  out.levels.resize(model.output_len, batch);
  out.probs.reserve(static_cast<size_t>(model.output_len));
  Eigen::VectorXi feedback = Eigen::VectorXi::Constant(batch, -1);  // zero-vector first input
  for (int s = 0; s < model.output_len; ++s) {
    cell_forward_step(model.decoder, feedback, h, c, i, f, g, o, h_next, c_next);
    h = h_next;
    c = c_next;
    Eigen::MatrixXd logits = model.dense_w * h;
    logits.colwise() += model.dense_b;
    softmax_columns(logits);
    for (Eigen::Index col = 0; col < batch; ++col) {
      out.levels(s, col) = argmax_lowest(logits.col(col));
    }
    feedback = out.levels.row(s).transpose();
    out.probs.push_back(std::move(logits));
  }
  return out;
}

Prediction predict_sequence(const EdModel& model, const Eigen::MatrixXd& one_hot_input) {
  if (one_hot_input.rows() != model.input_len || one_hot_input.cols() != model.v) {
    throw std::runtime_error(strfmt("predict: expected one-hot input [%d x %d]", model.input_len, model.v));
  }
  Eigen::MatrixXi levels(model.input_len, 1);
  for (int t = 0; t < model.input_len; ++t) {
    int hot = -1;
    for (int j = 0; j < model.v; ++j) {
      const double x = one_hot_input(t, j);
      if (x == 1.0 && hot < 0) {
        hot = j;
      } else if (x != 0.0) {
        throw std::runtime_error(strfmt("predict: input row %d is not one-hot", t));
      }
    }
    if (hot < 0) throw std::runtime_error(strfmt("predict: input row %d is not one-hot", t));
    levels(t, 0) = hot;
  }

  BatchPrediction batch = predict_batch(model, levels);
  Prediction out;
  out.probs.resize(model.output_len, model.v);
  out.levels.resize(model.output_len);
  for (int s = 0; s < model.output_len; ++s) {
    out.probs.row(s) = batch.probs[static_cast<size_t>(s)].col(0).transpose();
    out.levels[s] = batch.levels(s, 0);
  }
  return out;
}

std::pair<double, double> ed_forward_backward(const EdModel& model, const Eigen::MatrixXi& inputs,
                                              const Eigen::MatrixXi& targets, bool teacher_forcing,
                                              double lambda, bool include_biases, EdGradients* grads) {
  if (inputs.rows() != model.input_len || targets.rows() != model.output_len) {
    throw std::runtime_error("train: sequence lengths disagree with the model");
  }
  if (inputs.cols() != targets.cols()) throw std::runtime_error("train: batch size mismatch");
  const Eigen::Index batch = inputs.cols();
  if (batch < 1) throw std::runtime_error("train: empty batch");
  const int hs = model.hidden_size;
  const double scale = 1.0 / (static_cast<double>(batch) * model.output_len);

  CellTrace enc;
  enc.h.assign(static_cast<size_t>(model.input_len) + 1, Eigen::MatrixXd());
  enc.c.assign(static_cast<size_t>(model.input_len) + 1, Eigen::MatrixXd());
  enc.i.resize(static_cast<size_t>(model.input_len));
  enc.f.resize(static_cast<size_t>(model.input_len));
  enc.g.resize(static_cast<size_t>(model.input_len));
  enc.o.resize(static_cast<size_t>(model.input_len));
  enc.h[0] = Eigen::MatrixXd::Zero(hs, batch);
  enc.c[0] = Eigen::MatrixXd::Zero(hs, batch);
  for (int t = 0; t < model.input_len; ++t) {
    const size_t st = static_cast<size_t>(t);
    cell_forward_step(model.encoder, inputs.row(t).transpose(), enc.h[st], enc.c[st], enc.i[st],
                      enc.f[st], enc.g[st], enc.o[st], enc.h[st + 1], enc.c[st + 1]);
  }

  CellTrace dec;
  dec.h.assign(static_cast<size_t>(model.output_len) + 1, Eigen::MatrixXd());
  dec.c.assign(static_cast<size_t>(model.output_len) + 1, Eigen::MatrixXd());
  dec.i.resize(static_cast<size_t>(model.output_len));
  dec.f.resize(static_cast<size_t>(model.output_len));
  dec.g.resize(static_cast<size_t>(model.output_len));
  dec.o.resize(static_cast<size_t>(model.output_len));
  dec.h[0] = enc.h[static_cast<size_t>(model.input_len)];
  dec.c[0] = enc.c[static_cast<size_t>(model.input_len)];

  std::vector<Eigen::MatrixXd> probs(static_cast<size_t>(model.output_len));
  std::vector<Eigen::VectorXi> dec_inputs(static_cast<size_t>(model.output_len));
  double q = 0.0;
  for (int s = 0; s < model.output_len; ++s) {
    const size_t ss = static_cast<size_t>(s);
    if (s == 0) {
      dec_inputs[ss] = Eigen::VectorXi::Constant(batch, -1);
    } else if (teacher_forcing) {
      dec_inputs[ss] = targets.row(s - 1).transpose();
    } else {
      // Autoregressive feedback, treated as a constant during backprop.
      Eigen::VectorXi fb(batch);
      for (Eigen::Index col = 0; col < batch; ++col) fb[col] = argmax_lowest(probs[ss - 1].col(col));
      dec_inputs[ss] = fb;
    }
    cell_forward_step(model.decoder, dec_inputs[ss], dec.h[ss], dec.c[ss], dec.i[ss], dec.f[ss],
                      dec.g[ss], dec.o[ss], dec.h[ss + 1], dec.c[ss + 1]);
    Eigen::MatrixXd logits = model.dense_w * dec.h[ss + 1];
    logits.colwise() += model.dense_b;
    softmax_columns(logits);
    for (Eigen::Index col = 0; col < batch; ++col) {
      q -= std::log(std::max(logits(targets(s, col), col), 1e-12));
    }
    probs[ss] = std::move(logits);
  }
  q *= scale;
  const double q_l1 = lambda * l1_weight_sum(model, include_biases);
  if (grads == nullptr) return {q, q_l1};

  grads->resize_like(model);
  grads->set_zero();

  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(hs, batch);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(hs, batch);
  for (int s = model.output_len - 1; s >= 0; --s) {
    const size_t ss = static_cast<size_t>(s);
    Eigen::MatrixXd dlogits = probs[ss];
    for (Eigen::Index col = 0; col < batch; ++col) dlogits(targets(s, col), col) -= 1.0;
    dlogits *= scale;
    grads->dense_w.noalias() += dlogits * dec.h[ss + 1].transpose();
    grads->dense_b += dlogits.rowwise().sum();
    dh.noalias() += model.dense_w.transpose() * dlogits;
    cell_backward_step(model.decoder, dec_inputs[ss], dec.h[ss], dec.c[ss], dec.i[ss], dec.f[ss],
                       dec.g[ss], dec.o[ss], dec.c[ss + 1], dh, dc, grads->dec_wx, grads->dec_wh,
                       grads->dec_b);
  }
  for (int t = model.input_len - 1; t >= 0; --t) {
    const size_t st = static_cast<size_t>(t);
    cell_backward_step(model.encoder, inputs.row(t).transpose(), enc.h[st], enc.c[st], enc.i[st],
                       enc.f[st], enc.g[st], enc.o[st], enc.c[st + 1], dh, dc, grads->enc_wx,
                       grads->enc_wh, grads->enc_b);
  }

  if (lambda > 0) {
    auto add_sign = [lambda](const Eigen::MatrixXd& w, Eigen::MatrixXd& g) {
      g += lambda * w.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    };
    add_sign(model.encoder.wx, grads->enc_wx);
    add_sign(model.encoder.wh, grads->enc_wh);
    add_sign(model.decoder.wx, grads->dec_wx);
    add_sign(model.decoder.wh, grads->dec_wh);
    add_sign(model.dense_w, grads->dense_w);
    if (include_biases) {
      auto add_sign_v = [lambda](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
        g += lambda * w.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
      };
      add_sign_v(model.encoder.b, grads->enc_b);
      add_sign_v(model.decoder.b, grads->dec_b);
      add_sign_v(model.dense_b, grads->dense_b);
    }
  }
  return {q, q_l1};
}

namespace {

struct AdamState {
  EdGradients m;
  EdGradients v;
  std::int64_t t = 0;

  explicit AdamState(const EdModel& model) {
    m.resize_like(model);
    m.set_zero();
    v.resize_like(model);
    v.set_zero();
  }
};

template <class F>
void for_each_param(EdModel& model, EdGradients& g, AdamState& s, F&& f) {
  f(model.encoder.wx, g.enc_wx, s.m.enc_wx, s.v.enc_wx);
  f(model.encoder.wh, g.enc_wh, s.m.enc_wh, s.v.enc_wh);
  f(model.encoder.b, g.enc_b, s.m.enc_b, s.v.enc_b);
  f(model.decoder.wx, g.dec_wx, s.m.dec_wx, s.v.dec_wx);
  f(model.decoder.wh, g.dec_wh, s.m.dec_wh, s.v.dec_wh);
  f(model.decoder.b, g.dec_b, s.m.dec_b, s.v.dec_b);
  f(model.dense_w, g.dense_w, s.m.dense_w, s.v.dense_w);
  f(model.dense_b, g.dense_b, s.m.dense_b, s.v.dense_b);
}

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_step(EdModel& model, EdGradients& grads, AdamState& state, double lr) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for_each_param(model, grads, state, [&](auto& w, auto& g, auto& m, auto& v) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    w -= lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + kAdamEps).matrix());
  });
}

}  // namespace

TrainResult train_ed(const SequenceDataset& data, const TrainConfig& cfg, int pair_id) {
  cfg.validate();
  if (data.inputs.cols() < 1) throw std::runtime_error("train: empty dataset");
  if (data.inputs.cols() != data.targets.cols()) {
    throw std::runtime_error("train: input/target sequence counts disagree");
  }
  if (data.v < 2) throw std::runtime_error("train: dataset v must be >= 2");

  const std::uint64_t seed = mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(pair_id));
  const int n = static_cast<int>(data.inputs.cols());
  const int input_len = static_cast<int>(data.inputs.rows());
  const int output_len = static_cast<int>(data.targets.rows());

  TrainResult result;
  result.model = init_ed_model(data.v, cfg.hidden_size, input_len, output_len, pair_id, seed);
  AdamState adam(result.model);
  EdGradients grads;

  std::mt19937_64 shuffle_rng(mix_seed(seed, 1));
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsize = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXi bin(input_len, bsize);
      Eigen::MatrixXi btg(output_len, bsize);
      for (int j = 0; j < bsize; ++j) {
        bin.col(j) = data.inputs.col(order[static_cast<size_t>(start + j)]);
        btg.col(j) = data.targets.col(order[static_cast<size_t>(start + j)]);
      }
      auto [q, q_l1] = ed_forward_backward(result.model, bin, btg, cfg.teacher_forcing, cfg.l1_lambda,
                                           cfg.l1_include_biases, &grads);
      if (!std::isfinite(q) || !std::isfinite(q_l1)) {
        throw std::runtime_error(strfmt("train: non-finite loss at epoch %d, batch %d (pair %d)",
                                        epoch + 1, start / cfg.batch_size, pair_id));
      }
      epoch_sum += (q + q_l1) * bsize;
      adam_step(result.model, grads, adam, cfg.learning_rate);
    }
    result.epoch_objective.push_back(epoch_sum / n);
  }
  return result;
}

std::vector<EdModel> train_bank(const BankDataset& bank, const TrainConfig& cfg, int n_workers) {
  if (bank.pairs.empty()) throw std::runtime_error("bank: no pairs to train");
  if (static_cast<int>(bank.pairs.size()) != bank.channels * bank.scales) {
    throw std::runtime_error("bank: pair count disagrees with the channel/scale grid");
  }
  const int n_pairs = static_cast<int>(bank.pairs.size());
  std::vector<EdModel> models(static_cast<size_t>(n_pairs));

  const int workers = std::max(1, std::min(n_workers, n_pairs));
  if (workers == 1) {
    for (int p = 0; p < n_pairs; ++p) {
      models[static_cast<size_t>(p)] = train_ed(bank.pairs[static_cast<size_t>(p)], cfg, p).model;
    }
    return models;
  }

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int p = next.fetch_add(1);
      if (p >= n_pairs) return;
      try {
        models[static_cast<size_t>(p)] = train_ed(bank.pairs[static_cast<size_t>(p)], cfg, p).model;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return models;
}

}  // namespace mionset
