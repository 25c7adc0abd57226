// Predictive moments with explicit inverses and Bayesian linear ridge in
// feature space.
#pragma once

#include <Eigen/Dense>

#include <string>

namespace oracle {

struct Moments {
  double mean = 0;
  double variance = 0;
};

/// Kernel matrices of one test point against a training set.
struct Instance {
  Eigen::MatrixXd k_train, t_train;  // NNGP and NTK Gram, n x n
  Eigen::VectorXd k_cross, t_cross;  // test vs train
  double k_test = 0, t_test = 0;     // test diagonal
  Eigen::VectorXd y;
};

inline Moments dense_moments(const std::string& kind, const Instance& s, double gamma) {
  const Eigen::Index n = s.y.size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Moments m;
  if (kind == "nngp") {
    const Eigen::MatrixXd inv = (s.k_train + gamma * eye).inverse();
    m.mean = s.k_cross.dot(inv * s.y);
    m.variance = s.k_test - s.k_cross.dot(inv * s.k_cross);
  } else if (kind == "ntkgp") {
    const Eigen::MatrixXd inv = (s.t_train + gamma * eye).inverse();
    m.mean = s.t_cross.dot(inv * s.y);
    m.variance = s.t_test - s.t_cross.dot(inv * s.t_cross);
  } else {
    const double g = kind == "deep-ensemble" ? 0.0 : gamma;
    const Eigen::MatrixXd inv = (s.t_train + g * eye).inverse();
    const Eigen::RowVectorXd a = s.t_cross.transpose() * inv;
    m.mean = a * s.y;
    m.variance = s.k_test + a * s.k_train * a.transpose() - 2.0 * a.dot(s.k_cross);
  }
  return m;
}

/// Posterior over weights w ~ N(0, I) with y = Phi w + noise, noise variance
/// gamma; returns the predictive mean and the variance of phi_test . w.
inline Moments bayesian_ridge(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, const Eigen::VectorXd& phi_test,
                              double gamma) {
  const Eigen::Index p = phi.cols();
  const Eigen::MatrixXd a = phi.transpose() * phi + gamma * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd a_inv = a.inverse();
  const Eigen::VectorXd w = a_inv * phi.transpose() * y;
  return {phi_test.dot(w), gamma * phi_test.dot(a_inv * phi_test)};
}

}  // namespace oracle
