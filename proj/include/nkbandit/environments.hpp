// Bandit environments: the wheel problem with optional random-MLP morphing of
// its contexts, and CSV-backed datasets.
#pragma once

#include "nkbandit/agent.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nkb {

struct RewardParams {
  double mean;
  double std;
};

/// Wheel problem: 5 arms, contexts on the unit disk. Inside radius `delta`
/// arm 0 is best; outside, the arm of the context's quadrant pays `big`.
/// `epsilon` > 0 warps contexts through a fixed random ReLU MLP.
struct WheelConfig {
  double delta = 0.5;
  double epsilon = 0.0;
  int morph_depth = 5;
  int morph_width = 50;
  std::uint64_t morph_seed = 0;
  RewardParams big{50.0, 0.01};
  RewardParams small{1.2, 0.05};
  RewardParams peripheral{1.0, 0.05};

  void validate() const;
};

inline constexpr std::size_t kWheelArms = 5;

struct WheelSample {
  Eigen::Vector2d raw_context;
  Eigen::VectorXd context;
  int label = 0;
  Eigen::VectorXd reward_means;
  Eigen::VectorXd rewards;
};

/// Optimal arm for a raw context: 0 inside the inner disk, otherwise the
/// quadrant arm (+,+)->1, (-,+)->2, (-,-)->3, (+,-)->4.
int wheel_label(const Eigen::Vector2d& raw, double delta);
Eigen::VectorXd wheel_reward_means(const Eigen::Vector2d& raw, const WheelConfig& config);

/// Fixed random ReLU MLP in -> width -> ... -> width -> out with `depth`
/// weight layers, weights ~ N(0, (epsilon / sqrt(fan_in))^2), zero biases and a
/// linear last layer.
class MorphNetwork {
 public:
  MorphNetwork(double epsilon, std::uint64_t seed, int depth, int width, int in_dim = 2,
               int out_dim = 2);
  /// Maps each row of `inputs`. Identity when epsilon == 0.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& inputs) const;
  bool identity() const { return layers_.empty(); }

 private:
  std::vector<Eigen::MatrixXd> layers_;  // fan_out x fan_in
};

Eigen::MatrixXd morph(const Eigen::MatrixXd& raw_contexts, double epsilon, std::uint64_t morph_seed,
                      int depth, int width);

/// n wheel rounds with contexts uniform on the unit disk (r = sqrt(u)).
std::vector<WheelSample> sample_wheel(std::size_t n, const WheelConfig& config, Rng& rng);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Contexts and full reward table of a finite dataset.
struct DatasetEnv {
  Eigen::MatrixXd contexts;  // n x d
  Eigen::MatrixXd rewards;   // n x k
  std::optional<std::uint64_t> shuffle_seed;

  std::size_t arms() const { return static_cast<std::size_t>(rewards.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(rewards.rows()); }
  /// Same rows permuted by a seeded Fisher-Yates shuffle.
  DatasetEnv shuffled(std::uint64_t seed) const;
  void validate() const;
};

/// Classification CSV (header row, numeric features, integer label column
/// selected by header name or zero-based index). reward[i][a] = 1 if a is
/// the label of row i, else 0; k = max label + 1.
DatasetEnv load_csv_classification(const std::filesystem::path& path, const std::string& label_column,
                                   std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Contexts and rewards from two CSVs with header rows and equal row counts.
DatasetEnv load_csv_reward_matrix(const std::filesystem::path& context_path,
                                  const std::filesystem::path& reward_path);

/// One round as seen by the harness. The agent only ever receives `context`
/// and `rewards[chosen]`.
struct BanditRound {
  Eigen::VectorXd context;
  Eigen::VectorXd rewards;
  std::size_t optimal_arm = 0;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t arms() const = 0;
  virtual std::size_t context_dim() const = 0;
  virtual std::vector<BanditRound> rounds(std::size_t steps, Rng& rng) const = 0;
  /// Arm whose optimal rounds are excluded from peripheral accuracy, if any.
  virtual std::optional<std::size_t> interior_arm() const { return std::nullopt; }
};

class WheelEnvironment : public Environment {
 public:
  explicit WheelEnvironment(WheelConfig config);
  std::size_t arms() const override { return kWheelArms; }
  std::size_t context_dim() const override { return 2; }
  std::vector<BanditRound> rounds(std::size_t steps, Rng& rng) const override;
  std::optional<std::size_t> interior_arm() const override { return 0; }
  const WheelConfig& config() const { return config_; }

 private:
  WheelConfig config_;
};

/// Serves dataset rows in order, wrapping around when steps exceed the rows.
/// The optimal arm is the row's argmax reward (lowest index on ties).
class DatasetEnvironment : public Environment {
 public:
  explicit DatasetEnvironment(DatasetEnv data);
  std::size_t arms() const override { return data_.arms(); }
  std::size_t context_dim() const override { return static_cast<std::size_t>(data_.contexts.cols()); }
  std::vector<BanditRound> rounds(std::size_t steps, Rng& rng) const override;
  const DatasetEnv& data() const { return data_; }

 private:
  DatasetEnv data_;
};

}  // namespace nkb
