// Rollouts, evaluation metrics and multi-seed experiment sweeps.
#pragma once

#include "nkbandit/agent.hpp"
#include "nkbandit/bandit.hpp"
#include "nkbandit/baselines.hpp"
#include "nkbandit/environments.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nkb {

struct StepRecord {
  std::size_t arm = 0;
  double reward = 0;
  std::size_t optimal_arm = 0;
  double optimal_reward = 0;
  double round_time = 0;  // seconds spent in select + observe
};

struct RolloutLog {
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::optional<std::string> error;  // set when the agent aborted the rollout

  double cumulative_reward() const;
  double cumulative_optimal_reward() const;
  double cumulative_regret() const { return cumulative_optimal_reward() - cumulative_reward(); }
  double total_time() const;
};

/// Drives `agent` for `steps` rounds. The environment tape and the agent's
/// randomness come from independent streams of `seed`, so every agent run with
/// the same seed faces the same contexts and rewards.
RolloutLog run_rollout(const Environment& env, Agent& agent, std::size_t steps, std::uint64_t seed);

/// Share of peripheral rounds (optimal arm != interior_arm) where the agent
/// chose the optimal arm. Empty when the log has no peripheral rounds.
std::optional<double> peripheral_accuracy(const RolloutLog& log, std::size_t interior_arm = 0);

/// (alg - uniform) / (best - uniform); throws on a zero denominator.
double normalized_cumulative_reward(double alg, double uniform, double best);

struct TimingStats {
  double min = 0;
  double median = 0;  // mean of the central pair for even counts
  double max = 0;
};
std::optional<TimingStats> timing_stats(const RolloutLog& log);

void write_rollout_csv(const RolloutLog& log, std::ostream& out);

// ---------------------------------------------------------------------------
// Agent descriptions used by sweeps and the CLI.

enum class AgentKind { Kernel, Uniform, LinearTS, LinearUCB };

struct AgentSpec {
  AgentKind kind = AgentKind::Kernel;
  BanditConfig bandit{};
  NigPrior prior{};

  std::string policy_label() const;
  std::string distribution_label() const;  // "none" for non-kernel agents
  std::string process_label() const;
  std::string fingerprint() const;
};

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, std::size_t arms, std::size_t context_dim);

/// Runs `count` independent tasks on up to `threads` workers. Each task writes
/// only its own slot, so results do not depend on the thread count.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task);

/// Worker count from NKBANDIT_THREADS, else hardware concurrency.
std::size_t default_threads();

struct GridSpec {
  std::vector<double> epsilons{0.0, 2.5, 5.0, 7.5, 10.0};
  std::vector<double> deltas{0.5, 0.7, 0.9, 0.95, 0.99};
  std::vector<AgentSpec> configs{AgentSpec{}};
  std::size_t runs = 10;
  std::size_t steps = 5000;
  std::uint64_t master_seed = 0;
  WheelConfig wheel{};  // delta, epsilon and morph_seed are overridden per cell

  void validate() const;
};

struct GridRow {
  double epsilon = 0;
  double delta = 0;
  std::size_t config = 0;
  std::size_t run = 0;
  std::optional<double> pacc;
  double cum_reward = 0;
  std::optional<std::string> error;
};

/// Seed of (cell, run); shared by every config so configs see the same tapes.
std::uint64_t cell_run_seed(std::uint64_t master_seed, std::size_t cell, std::size_t run);

/// The wheel of one grid cell/run; its morph network is drawn from `seed`.
WheelConfig cell_wheel(const WheelConfig& base, double epsilon, double delta, std::uint64_t seed);

/// One row per (cell, config, run), ordered by epsilon, delta, config, run.
std::vector<GridRow> grid_sweep(const GridSpec& spec, std::size_t threads = 1);

void write_grid_csv(const std::vector<GridRow>& rows, const GridSpec& spec, std::ostream& out);

// ---------------------------------------------------------------------------
// Supervised complexity check of the morphed wheel.

/// One-vs-all NNGP kernel ridge classifier; returns test accuracy.
double ridge_classification_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                                     const Eigen::MatrixXd& test_x, const std::vector<int>& test_labels,
                                     std::size_t classes, const KernelConfig& kernel, double gamma);

struct ComplexityPoint {
  double epsilon = 0;
  double mean_accuracy = 0;
  double std_accuracy = 0;
  std::size_t failures = 0;
};

struct ComplexitySpec {
  std::vector<double> epsilons{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t seeds = 10;
  double delta = 0.5;
  KernelConfig kernel{};
  double gamma = 1e-3;  // nugget; the labels are noiseless
  std::uint64_t master_seed = 0;
  WheelConfig wheel{};
};

std::vector<ComplexityPoint> complexity_check(const ComplexitySpec& spec, std::size_t threads = 1);

}  // namespace nkb
