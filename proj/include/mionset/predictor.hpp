#pragma once

#include <cstdint>
#include <vector>

#include "mionset/cwt.hpp"
#include "mionset/lstm.hpp"
#include "mionset/quantizer.hpp"

namespace mionset {

// One encoder-decoder predictor for a single (channel, scale) stream. The
// encoder folds input_len one-hot levels into its final (h, c); the decoder
// starts from that state with a zero vector as its first input and emits
// output_len softmax distributions over the v levels, feeding the argmax
// one-hot back in autoregressively.
struct EdModel {
  LstmCell encoder;
  LstmCell decoder;
  Eigen::MatrixXd dense_w;  // [v x hidden]
  Eigen::VectorXd dense_b;  // [v]
  int input_len = 0;
  int output_len = 0;
  int v = 0;
  int hidden_size = 0;
  int pair_id = 0;

  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  double l1_lambda = 0.001;
  int hidden_size = 90;
  double learning_rate = 1e-3;
  int batch_size = 32;
  bool teacher_forcing = true;
  bool l1_include_biases = false;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

// Level sequences for one pair, one column per sequence.
struct SequenceDataset {
  Eigen::MatrixXi inputs;   // [input_len x N]
  Eigen::MatrixXi targets;  // [output_len x N]
  int v = 0;
};

// Per-pair datasets in row-major pair order (pair_id = channel*scales + scale).
struct BankDataset {
  int channels = 0;
  int scales = 0;
  int v = 0;
  std::vector<SequenceDataset> pairs;
};

BankDataset quantize_bank(const WindowPair& windows, const Codebook& cb);

EdModel init_ed_model(int v, int hidden_size, int input_len, int output_len, int pair_id,
                      std::uint64_t seed);

struct Prediction {
  Eigen::MatrixXd probs;   // [output_len x v], each row a softmax distribution
  Eigen::VectorXi levels;  // argmax per step, ties to the lowest index
};

struct BatchPrediction {
  std::vector<Eigen::MatrixXd> probs;  // output_len entries of [v x batch]
  Eigen::MatrixXi levels;              // [output_len x batch]
};

// Autoregressive inference on a batch of level sequences (columns).
BatchPrediction predict_batch(const EdModel& model, const Eigen::MatrixXi& input_levels);

// Single-sequence inference from explicit one-hot rows; validates the rows.
Prediction predict_sequence(const EdModel& model, const Eigen::MatrixXd& one_hot_input);

// Cross-entropy part Q (mean over sequences and steps, probabilities clamped
// to >= 1e-12 before the log) and the l1 penalty Q_l1 = lambda * sum |w|.
// `probs` holds one [v x batch] column-stochastic matrix per output step.
std::pair<double, double> compute_loss(const EdModel& model, const std::vector<Eigen::MatrixXd>& probs,
                                       const Eigen::MatrixXi& target_levels, double lambda,
                                       bool include_biases = false);

double l1_weight_sum(const EdModel& model, bool include_biases);

struct EdGradients {
  Eigen::MatrixXd enc_wx, enc_wh, dec_wx, dec_wh, dense_w;
  Eigen::VectorXd enc_b, dec_b, dense_b;

  void resize_like(const EdModel& model);
  void set_zero();
};

// Objective evaluation on one minibatch: Q + Q_l1, teacher-forced or
// autoregressive decoding. When `grads` is non-null it receives the full BPTT
// gradient of Q + Q_l1 (decoder feedback treated as constant).
std::pair<double, double> ed_forward_backward(const EdModel& model, const Eigen::MatrixXi& inputs,
                                              const Eigen::MatrixXi& targets, bool teacher_forcing,
                                              double lambda, bool include_biases, EdGradients* grads);

struct TrainResult {
  EdModel model;
  std::vector<double> epoch_objective;  // mean Q + Q_l1 per epoch
};

// Adam minibatch training. The RNG seed used for init and shuffling is
// mix_seed(cfg.rng_seed, pair_id), so bank members are decoupled.
TrainResult train_ed(const SequenceDataset& data, const TrainConfig& cfg, int pair_id);

// Trains one ED per (channel, scale) pair, optionally across worker threads.
// Results are identical regardless of n_workers.
std::vector<EdModel> train_bank(const BankDataset& bank, const TrainConfig& cfg, int n_workers = 1);

}  // namespace mionset
