// Reference policies: uniform sampling and linear TS/UCB under a
// Normal-inverse-Gamma conjugate prior.
#pragma once

#include "nkbandit/agent.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace nkb {

struct NigPrior {
  double lambda = 0.25;
  double a0 = 6.0;
  double b0 = 6.0;
};

/// Posterior of one arm: theta | s2 ~ N(mean, s2 precision^-1), s2 ~ InvGamma(a, b).
struct NigArm {
  Eigen::MatrixXd precision;
  Eigen::VectorXd mean;
  double a = 0;
  double b = 0;
};

struct NigState {
  NigState(std::size_t arms, std::size_t dim, NigPrior prior = {});
  std::vector<NigArm> arms;
  NigPrior prior;
  std::size_t dim() const { return static_cast<std::size_t>(arms.front().mean.size()); }
};

/// Rank-one conjugate update of `arm` with (context, reward).
void nig_update(NigState& state, std::size_t arm, const Eigen::VectorXd& context, double reward);

/// Closed-form posterior after observing the rows of X with targets y at once.
NigArm nig_batch_posterior(const NigPrior& prior, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

enum class LinearPolicy { TS, UCB };

struct LinearSelection {
  std::size_t arm = 0;
  /// UCB needed a > 1 for the posterior variance b/(a-1) and fell back to b/a.
  bool variance_fallback = false;
};

/// TS: per arm s2 ~ InvGamma(a, b), theta ~ N(mean, s2 precision^-1), score theta.x.
/// UCB: mean.x + eta sqrt(x^T precision^-1 x * b/(a-1)). Ties go to the lowest index.
LinearSelection linear_select(const NigState& state, const Eigen::VectorXd& context, LinearPolicy policy,
                              double eta, Rng& rng);

std::size_t uniform_select(std::size_t k, Rng& rng);

class UniformAgent : public Agent {
 public:
  explicit UniformAgent(std::size_t arms) : arms_(arms) {}
  std::size_t select(const Eigen::VectorXd&, Rng& rng) override { return uniform_select(arms_, rng); }
  void observe(const Eigen::VectorXd&, std::size_t, double) override {}
  std::string name() const override { return "uniform"; }

 private:
  std::size_t arms_;
};

/// Linear bandit over the raw context, optionally with an appended constant
/// feature so arm offsets are representable.
class LinearAgent : public Agent {
 public:
  LinearAgent(std::size_t arms, std::size_t context_dim, LinearPolicy policy, double eta = 0.1,
              NigPrior prior = {}, bool intercept = true);
  std::size_t select(const Eigen::VectorXd& context, Rng& rng) override;
  void observe(const Eigen::VectorXd& context, std::size_t arm, double reward) override;
  std::string name() const override { return policy_ == LinearPolicy::TS ? "linear-ts" : "linear-ucb"; }
  const NigState& state() const { return state_; }
  std::size_t variance_fallbacks() const { return fallbacks_; }

 private:
  Eigen::VectorXd features(const Eigen::VectorXd& context) const;

  NigState state_;
  LinearPolicy policy_;
  double eta_;
  bool intercept_;
  std::size_t fallbacks_ = 0;
};

}  // namespace nkb
