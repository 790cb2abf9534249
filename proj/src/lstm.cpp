#include "mionset/lstm.hpp"

#include <stdexcept>

#include "mionset/common.hpp"

namespace mionset {

void LstmCell::validate() const {
  const int h = hidden_size();
  if (h < 1 || input_size() < 1) throw std::runtime_error("lstm: empty cell");
  if (wx.rows() != 4 * h || wh.rows() != 4 * h || b.size() != 4 * h) {
    throw std::runtime_error("lstm: stacked gate shapes are inconsistent");
  }
  if (!wx.allFinite() || !wh.allFinite() || !b.allFinite()) {
    throw std::runtime_error("lstm: non-finite parameter");
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> cell_step(const LstmCell& cell, const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& h_prev,
                                                      const Eigen::VectorXd& c_prev) {
  const int h = cell.hidden_size();
  if (x.size() != cell.input_size() || h_prev.size() != h || c_prev.size() != h) {
    throw std::runtime_error(strfmt("lstm: shape mismatch (input %d/%d, hidden %d/%d/%d)",
                                    static_cast<int>(x.size()), cell.input_size(),
                                    static_cast<int>(h_prev.size()), static_cast<int>(c_prev.size()), h));
  }
  Eigen::VectorXd z = cell.wx * x + cell.wh * h_prev + cell.b;
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  Eigen::VectorXd i = z.head(h).unaryExpr(sigmoid);
  Eigen::VectorXd f = z.segment(h, h).unaryExpr(sigmoid);
  Eigen::VectorXd g = z.segment(2 * h, h).array().tanh();
  Eigen::VectorXd o = z.tail(h).unaryExpr(sigmoid);
  Eigen::VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Eigen::VectorXd hidden = o.cwiseProduct(c.array().tanh().matrix());
  return {hidden, c};
}

}  // namespace mionset
