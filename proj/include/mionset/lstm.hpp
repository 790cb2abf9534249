#pragma once

#include <Eigen/Dense>
#include <utility>

namespace mionset {

// Single LSTM layer. Gate parameters are stacked row-wise in the order
// input gate, forget gate, cell candidate, output gate, so wx is
// [4*hidden x input], wh is [4*hidden x hidden], b is [4*hidden].
struct LstmCell {
  Eigen::MatrixXd wx;
  Eigen::MatrixXd wh;
  Eigen::VectorXd b;

  int input_size() const { return static_cast<int>(wx.cols()); }
  int hidden_size() const { return static_cast<int>(wh.cols()); }
  void validate() const;
};

// One step of the standard gated update:
//   i,f,o = sigmoid(...), g = tanh(...)
//   c = f.*c_prev + i.*g,  h = o.*tanh(c)
std::pair<Eigen::VectorXd, Eigen::VectorXd> cell_step(const LstmCell& cell, const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& h_prev,
                                                      const Eigen::VectorXd& c_prev);

}  // namespace mionset
