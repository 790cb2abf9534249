#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mionset/recording.hpp"

namespace mionset {

struct PcaModel {
  Eigen::VectorXd mean;        // [n_channels]
  Eigen::MatrixXd components;  // [n_channels x m_prime], orthonormal columns
  Eigen::VectorXd eigenvalues; // all n_channels eigenvalues, descending
  double explained_fraction = 0.0;
  int m_prime = 0;
};

// Covariance eigendecomposition over the time-concatenated samples of the
// given trials. m_prime = smallest k whose cumulative explained variance
// reaches `retention`. Component signs are fixed so the largest-magnitude
// entry of each column is positive.
PcaModel pca_fit(const std::vector<Recording>& trials, double retention = 0.70);

// x -> components^T (x - mean); output channels are named pc0..pc{m'-1}.
Recording pca_project(const Recording& rec, const PcaModel& model);

}  // namespace mionset
