// Neural-kernel contextual bandit: per-arm (disjoint) or zero-padded shared
// (joint) kernel models, scored with UCB, Thompson sampling or greedily.
#pragma once

#include "nkbandit/agent.hpp"
#include "nkbandit/kernels.hpp"
#include "nkbandit/predictive.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nkb {

enum class Policy { UCB, TS, Greedy };
enum class ArmMode { Disjoint, Joint };

std::string_view to_string(Policy policy);
std::string_view to_string(ArmMode mode);
Policy parse_policy(std::string_view name);
ArmMode parse_arm_mode(std::string_view name);

struct BanditConfig {
  std::size_t arms = 5;
  Policy policy = Policy::TS;
  DistributionKind distribution = DistributionKind::NNGP;
  ProcessKind process = ProcessKind::gaussian();
  double gamma = 0.2;
  double eta = 0.1;
  std::size_t init_pulls = 2;
  std::size_t train_freq = 20;
  ArmMode mode = ArmMode::Disjoint;
  KernelConfig kernel{};
  /// Grow the existing Cholesky factor on retrain instead of refactorizing.
  bool incremental_factorization = false;

  void validate() const;
};

/// p = mu + (eta / sqrt(gamma)) sigma for UCB; a draw from N(mu, (eta/gamma) sigma^2)
/// for TS, or mu + sqrt(eta/gamma) sigma t_dof when `dof` is set; mu for Greedy.
double score(double mu, double sigma, std::optional<double> dof, Policy policy, double eta,
             double gamma, Rng& rng);

/// Places `context` in block `arm` of a k-block zero vector.
Eigen::VectorXd zero_pad(const Eigen::VectorXd& context, std::size_t arm, std::size_t k);

struct ActionScore {
  std::size_t arm = 0;
  double p = 0;
  double mean = 0;
  double std = 0;
};

/// Data and cached posterior of one kernel model (one arm when disjoint, the
/// whole bandit when joint). Observations queue up as pending rows and are
/// folded into the Gram and factorization on retrain.
class ArmState {
 public:
  std::size_t observations() const { return trained_rows() + pending_contexts_.size(); }
  std::size_t trained_rows() const { return static_cast<std::size_t>(targets_.size()); }
  std::size_t staleness() const { return staleness_; }  // rounds since the last retrain
  std::size_t retrains() const { return retrains_; }
  const GramPair<double>* gram() const { return gram_.get(); }
  const PosteriorPredictor<double>& predictor() const { return predictor_; }
  const Eigen::VectorXd& targets() const { return targets_; }

 private:
  friend class NkBandit;

  std::vector<Eigen::VectorXd> pending_contexts_;
  std::vector<double> pending_rewards_;
  Eigen::VectorXd targets_;
  std::shared_ptr<const GramPair<double>> gram_;
  PosteriorPredictor<double> predictor_;
  std::size_t staleness_ = 0;
  std::size_t retrains_ = 0;
};

class NkBandit : public Agent {
 public:
  NkBandit(BanditConfig config, std::size_t context_dim);

  /// Round-robin during the first arms * init_pulls rounds, argmax score after.
  /// The first scored round trains every model on the round-robin data.
  ActionScore select_action(const Eigen::VectorXd& context, Rng& rng);

  /// Queues the observation and advances the shared retrain clock; every
  /// train_freq rounds all models fold in their pending rows. Predictions in
  /// between use the last trained models.
  void update(const Eigen::VectorXd& context, std::size_t arm, double reward);

  std::size_t select(const Eigen::VectorXd& context, Rng& rng) override {
    return select_action(context, rng).arm;
  }
  void observe(const Eigen::VectorXd& context, std::size_t arm, double reward) override {
    update(context, arm, reward);
  }
  std::string name() const override;

  /// Moments of every arm at `context` under the current cached models.
  std::vector<PredictiveMoments<double>> moments(const Eigen::VectorXd& context) const;

  const BanditConfig& config() const { return config_; }
  const std::vector<ArmState>& states() const { return states_; }
  std::size_t rounds() const { return round_; }
  std::size_t clamped_variances() const { return clamped_; }

 private:
  ArmState& model_for(std::size_t arm);
  Eigen::VectorXd model_input(const Eigen::VectorXd& context, std::size_t arm) const;
  void retrain(ArmState& state, std::size_t model_index);
  void retrain_all();

  BanditConfig config_;
  std::size_t context_dim_;
  std::vector<ArmState> states_;
  std::size_t round_ = 0;
  mutable std::size_t clamped_ = 0;
};

}  // namespace nkb
