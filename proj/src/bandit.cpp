#include "nkbandit/bandit.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nkb {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::UCB: return "ucb";
    case Policy::TS: return "ts";
    case Policy::Greedy: return "greedy";
  }
  return "?";
}

std::string_view to_string(ArmMode mode) { return mode == ArmMode::Joint ? "joint" : "disjoint"; }

Policy parse_policy(std::string_view name) {
  if (name == "ucb") return Policy::UCB;
  if (name == "ts") return Policy::TS;
  if (name == "greedy") return Policy::Greedy;
  throw std::invalid_argument("unknown kernel policy '" + std::string(name) + "'");
}

ArmMode parse_arm_mode(std::string_view name) {
  if (name == "disjoint") return ArmMode::Disjoint;
  if (name == "joint") return ArmMode::Joint;
  throw std::invalid_argument("unknown arm mode '" + std::string(name) + "'");
}

void BanditConfig::validate() const {
  if (arms < 2) throw std::invalid_argument("BanditConfig: need at least 2 arms");
  if (!(gamma > 0)) throw std::invalid_argument("BanditConfig: gamma must be > 0");
  if (!(eta >= 0)) throw std::invalid_argument("BanditConfig: eta must be >= 0");
  if (init_pulls < 1) throw std::invalid_argument("BanditConfig: init_pulls must be >= 1");
  if (train_freq < 1) throw std::invalid_argument("BanditConfig: train_freq must be >= 1");
  if (process.is_student_t() && !(process.nu > 2))
    throw std::invalid_argument("BanditConfig: Student-t process needs nu > 2");
  kernel.validate();
}

double score(double mu, double sigma, std::optional<double> dof, Policy policy, double eta,
             double gamma, Rng& rng) {
  switch (policy) {
    case Policy::Greedy:
      return mu;
    case Policy::UCB:
      return mu + eta / std::sqrt(gamma) * sigma;
    case Policy::TS: {
      const double draw = dof ? std::student_t_distribution<double>(*dof)(rng)
                              : std::normal_distribution<double>(0.0, 1.0)(rng);
      return mu + std::sqrt(eta / gamma) * sigma * draw;
    }
  }
  return mu;
}

Eigen::VectorXd zero_pad(const Eigen::VectorXd& context, std::size_t arm, std::size_t k) {
  if (arm >= k)
    throw std::invalid_argument("zero_pad: arm " + std::to_string(arm) + " out of range for " +
                                std::to_string(k) + " arms");
  const Eigen::Index d = context.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d * static_cast<Eigen::Index>(k));
  out.segment(d * static_cast<Eigen::Index>(arm), d) = context;
  return out;
}

NkBandit::NkBandit(BanditConfig config, std::size_t context_dim)
    : config_(std::move(config)), context_dim_(context_dim) {
  config_.validate();
  if (context_dim_ == 0) throw std::invalid_argument("NkBandit: context dimension must be >= 1");
  states_.resize(config_.mode == ArmMode::Disjoint ? config_.arms : 1);
}

std::string NkBandit::name() const {
  std::string s = std::string(to_string(config_.distribution)) + "-" +
                  (config_.process.is_student_t() ? "tp" : "gp") + "-" +
                  std::string(to_string(config_.policy));
  if (config_.mode == ArmMode::Joint) s += "-joint";
  return s;
}

ArmState& NkBandit::model_for(std::size_t arm) {
  return config_.mode == ArmMode::Disjoint ? states_[arm] : states_[0];
}

Eigen::VectorXd NkBandit::model_input(const Eigen::VectorXd& context, std::size_t arm) const {
  return config_.mode == ArmMode::Disjoint ? context : zero_pad(context, arm, config_.arms);
}

std::vector<PredictiveMoments<double>> NkBandit::moments(const Eigen::VectorXd& context) const {
  if (static_cast<std::size_t>(context.size()) != context_dim_)
    throw std::invalid_argument("NkBandit: context has dimension " + std::to_string(context.size()) +
                                ", expected " + std::to_string(context_dim_));
  std::vector<PredictiveMoments<double>> out(config_.arms);
  for (std::size_t a = 0; a < config_.arms; ++a) {
    const ArmState& state = config_.mode == ArmMode::Disjoint ? states_[a] : states_[0];
    const Eigen::VectorXd x = model_input(context, a);
    const auto diag = kernel_entry<double>(x, x, config_.kernel);
    KernelPair<Eigen::VectorXd> cross;
    if (state.gram_ && state.gram_->rows() > 0) cross = cross_kernels(x, *state.gram_);
    try {
      out[a] = state.predictor_.predict(cross, diag, config_.process);
    } catch (const NumericalError& e) {
      throw NumericalError("arm " + std::to_string(a) + ": " + e.what(), e.condition_estimate());
    }
    if (out[a].clamped) ++clamped_;
  }
  return out;
}

ActionScore NkBandit::select_action(const Eigen::VectorXd& context, Rng& rng) {
  ++round_;
  const std::size_t warmup = config_.arms * config_.init_pulls;
  if (round_ <= warmup) {
    ActionScore s;
    s.arm = ((round_ - 1) / config_.init_pulls) % config_.arms;
    return s;
  }
  if (round_ == warmup + 1) retrain_all();
  const auto m = moments(context);
  ActionScore best;
  bool first = true;
  for (std::size_t a = 0; a < config_.arms; ++a) {
    const double sigma = std::sqrt(m[a].variance);
    const double p = score(m[a].mean, sigma, m[a].dof, config_.policy, config_.eta, config_.gamma, rng);
    if (first || p > best.p) {
      best = {a, p, m[a].mean, sigma};
      first = false;
    }
  }
  return best;
}

void NkBandit::update(const Eigen::VectorXd& context, std::size_t arm, double reward) {
  if (arm >= config_.arms)
    throw std::invalid_argument("NkBandit::update: arm " + std::to_string(arm) + " out of range");
  if (static_cast<std::size_t>(context.size()) != context_dim_)
    throw std::invalid_argument("NkBandit::update: context dimension mismatch");
  ArmState& state = model_for(arm);
  state.pending_contexts_.push_back(model_input(context, arm));
  state.pending_rewards_.push_back(reward);
  for (auto& s : states_) ++s.staleness_;
  if (states_.front().staleness_ >= config_.train_freq) retrain_all();
}

void NkBandit::retrain_all() {
  for (std::size_t i = 0; i < states_.size(); ++i) retrain(states_[i], i);
}

void NkBandit::retrain(ArmState& state, std::size_t model_index) {
  const std::size_t r = state.pending_contexts_.size();
  state.staleness_ = 0;
  if (r == 0) return;
  const Eigen::Index dim = state.pending_contexts_.front().size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(r), dim);
  for (std::size_t i = 0; i < r; ++i) rows.row(static_cast<Eigen::Index>(i)) = state.pending_contexts_[i];

  const Eigen::Index n = state.targets_.size();
  Eigen::VectorXd targets(n + static_cast<Eigen::Index>(r));
  targets.head(n) = state.targets_;
  for (std::size_t i = 0; i < r; ++i) targets(n + static_cast<Eigen::Index>(i)) = state.pending_rewards_[i];

  std::shared_ptr<const GramPair<double>> grown;
  if (state.gram_)
    grown = std::make_shared<const GramPair<double>>(gram_extend(*state.gram_, rows, config_.kernel));
  else
    grown = std::make_shared<const GramPair<double>>(gram(rows, config_.kernel));

  try {
    if (config_.incremental_factorization && state.gram_ && state.predictor_.size() == n)
      state.predictor_ = state.predictor_.extended(grown, targets);
    else
      state.predictor_ = PosteriorPredictor<double>(config_.distribution, grown, targets, config_.gamma);
  } catch (const NumericalError& e) {
    throw NumericalError("arm " + std::to_string(model_index) + ": " + e.what(), e.condition_estimate());
  }
  state.gram_ = std::move(grown);
  state.targets_ = std::move(targets);
  state.pending_contexts_.clear();
  state.pending_rewards_.clear();
  state.staleness_ = 0;
  ++state.retrains_;
}

}  // namespace nkb
