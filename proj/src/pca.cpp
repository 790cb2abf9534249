#include "mionset/pca.hpp"

#include <Eigen/Eigenvalues>

#include "mionset/common.hpp"

namespace mionset {

PcaModel pca_fit(const std::vector<Recording>& trials, double retention) {
  if (trials.empty()) throw std::runtime_error("pca: no trials given");
  if (!(retention > 0) || retention > 1) throw std::runtime_error("pca: retention must lie in (0, 1]");
  const Recording& ref = trials.front();
  const int n_ch = ref.n_channels();
  std::int64_t total_rows = 0;
  for (const Recording& r : trials) {
    if (r.channels != ref.channels) throw std::runtime_error("pca: trials disagree on channel set");
    total_rows += r.n_samples();
  }
  if (total_rows <= n_ch) {
    throw std::runtime_error(strfmt("pca: %lld samples for %d channels; need more samples than channels",
                                    static_cast<long long>(total_rows), n_ch));
  }

  // Concatenate in trial order so the covariance accumulation order is fixed.
  Eigen::MatrixXd data(total_rows, n_ch);
  std::int64_t row = 0;
  for (const Recording& r : trials) {
    data.middleRows(row, r.n_samples()) = r.samples.cast<double>();
    row += r.n_samples();
  }

  PcaModel model;
  model.mean = data.colwise().mean();
  data.rowwise() -= model.mean.transpose();
  Eigen::MatrixXd cov = (data.transpose() * data) / static_cast<double>(total_rows - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

  // SelfAdjointEigenSolver sorts ascending; flip to descending and clamp tiny
  // negative eigenvalues (roundoff on rank-deficient data) to zero.
  Eigen::VectorXd evals(n_ch);
  Eigen::MatrixXd evecs(n_ch, n_ch);
  for (int i = 0; i < n_ch; ++i) {
    double v = solver.eigenvalues()[n_ch - 1 - i];
    evals[i] = v > 0 ? v : 0.0;
    evecs.col(i) = solver.eigenvectors().col(n_ch - 1 - i);
  }

  // Deterministic sign: largest-magnitude entry of each component positive.
  for (int i = 0; i < n_ch; ++i) {
    int arg = 0;
    double best = 0.0;
    for (int j = 0; j < n_ch; ++j) {
      if (std::abs(evecs(j, i)) > best) {
        best = std::abs(evecs(j, i));
        arg = j;
      }
    }
    if (evecs(arg, i) < 0) evecs.col(i) = -evecs.col(i);
  }

  const double total_var = evals.sum();
  if (!(total_var > 0)) throw std::runtime_error("pca: data has zero variance");
  int m_prime = n_ch;
  double cum = 0.0;
  for (int i = 0; i < n_ch; ++i) {
    cum += evals[i];
    if (cum >= retention * total_var) {
      m_prime = i + 1;
      break;
    }
  }
  model.eigenvalues = evals;
  model.components = evecs.leftCols(m_prime);
  model.m_prime = m_prime;
  model.explained_fraction = evals.head(m_prime).sum() / total_var;
  return model;
}

Recording pca_project(const Recording& rec, const PcaModel& model) {
  rec.validate();
  if (rec.n_channels() != model.mean.size()) {
    throw std::runtime_error(strfmt("pca: recording has %d channels but model expects %d",
                                    rec.n_channels(), static_cast<int>(model.mean.size())));
  }
  Eigen::MatrixXd centered = rec.samples.cast<double>();
  centered.rowwise() -= model.mean.transpose();
  Eigen::MatrixXd projected = centered * model.components;

  Recording out;
  out.sample_rate_hz = rec.sample_rate_hz;
  for (int i = 0; i < model.m_prime; ++i) out.channels.push_back(strfmt("pc%d", i));
  out.samples = projected.cast<float>();
  out.markers = rec.markers;
  return out;
}

}  // namespace mionset
