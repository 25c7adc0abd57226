#include "nkbandit/baselines.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nkb {

NigState::NigState(std::size_t arm_count, std::size_t dim, NigPrior p) : prior(p) {
  if (arm_count < 1 || dim < 1) throw std::invalid_argument("NigState: need arms >= 1 and dim >= 1");
  if (!(p.lambda > 0 && p.a0 > 0 && p.b0 > 0))
    throw std::invalid_argument("NigState: prior hyperparameters must be positive");
  const auto d = static_cast<Eigen::Index>(dim);
  arms.assign(arm_count, NigArm{p.lambda * Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d), p.a0, p.b0});
}

void nig_update(NigState& state, std::size_t arm, const Eigen::VectorXd& x, double y) {
  if (arm >= state.arms.size()) throw std::invalid_argument("nig_update: arm out of range");
  NigArm& s = state.arms[arm];
  if (x.size() != s.mean.size()) throw std::invalid_argument("nig_update: context dimension mismatch");
  const double old_quad = s.mean.dot(s.precision * s.mean);
  const Eigen::VectorXd moment = s.precision * s.mean + x * y;
  s.precision.noalias() += x * x.transpose();
  s.mean = s.precision.llt().solve(moment);
  s.a += 0.5;
  s.b += 0.5 * (y * y + old_quad - s.mean.dot(s.precision * s.mean));
}

NigArm nig_batch_posterior(const NigPrior& prior, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index d = X.cols();
  NigArm s;
  s.precision = prior.lambda * Eigen::MatrixXd::Identity(d, d) + X.transpose() * X;
  s.mean = s.precision.llt().solve(X.transpose() * y);
  s.a = prior.a0 + 0.5 * static_cast<double>(X.rows());
  s.b = prior.b0 + 0.5 * (y.squaredNorm() - s.mean.dot(s.precision * s.mean));
  return s;
}

LinearSelection linear_select(const NigState& state, const Eigen::VectorXd& x, LinearPolicy policy,
                              double eta, Rng& rng) {
  LinearSelection out;
  double best = 0;
  for (std::size_t a = 0; a < state.arms.size(); ++a) {
    const NigArm& s = state.arms[a];
    const Eigen::LLT<Eigen::MatrixXd> llt(s.precision);
    double value = 0;
    if (policy == LinearPolicy::TS) {
      // s2 ~ InvGamma(a, b) as b / Gamma(a, 1); theta = mean + s L^-T z with precision = L L^T.
      const double s2 = s.b / std::gamma_distribution<double>(s.a, 1.0)(rng);
      Eigen::VectorXd z(s.mean.size());
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
      const Eigen::VectorXd offset = llt.matrixU().solve(z);
      value = (s.mean + std::sqrt(s2) * offset).dot(x);
    } else {
      double scale = 0;
      if (s.a > 1.0) {
        scale = s.b / (s.a - 1.0);
      } else {
        scale = s.b / s.a;
        out.variance_fallback = true;
      }
      const double quad = x.dot(llt.solve(x));
      value = s.mean.dot(x) + eta * std::sqrt(quad * scale);
    }
    if (a == 0 || value > best) {
      best = value;
      out.arm = a;
    }
  }
  return out;
}

std::size_t uniform_select(std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("uniform_select: k must be >= 1");
  return std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
}

LinearAgent::LinearAgent(std::size_t arms, std::size_t context_dim, LinearPolicy policy, double eta,
                         NigPrior prior, bool intercept)
    : state_(arms, context_dim + (intercept ? 1 : 0), prior), policy_(policy), eta_(eta), intercept_(intercept) {}

Eigen::VectorXd LinearAgent::features(const Eigen::VectorXd& context) const {
  if (!intercept_) return context;
  Eigen::VectorXd f(context.size() + 1);
  f << context, 1.0;
  return f;
}

std::size_t LinearAgent::select(const Eigen::VectorXd& context, Rng& rng) {
  const auto s = linear_select(state_, features(context), policy_, eta_, rng);
  if (s.variance_fallback) ++fallbacks_;
  return s.arm;
}

void LinearAgent::observe(const Eigen::VectorXd& context, std::size_t arm, double reward) {
  nig_update(state_, arm, features(context), reward);
}

}  // namespace nkb
