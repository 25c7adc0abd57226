#include "nkbandit/environments.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace nkb {

void WheelConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("WheelConfig: delta must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("WheelConfig: epsilon must be >= 0");
  if (morph_depth < 1) throw std::invalid_argument("WheelConfig: morph_depth must be >= 1");
  if (morph_width < 1) throw std::invalid_argument("WheelConfig: morph_width must be >= 1");
  for (const RewardParams& p : {big, small, peripheral})
    if (!(p.mean > 0.0 && p.std > 0.0))
      throw std::invalid_argument("WheelConfig: reward means and stds must be positive");
}

int wheel_label(const Eigen::Vector2d& raw, double delta) {
  if (raw.norm() <= delta) return 0;
  const bool east = raw.x() >= 0.0;
  const bool north = raw.y() >= 0.0;
  if (east && north) return 1;
  if (!east && north) return 2;
  if (!east) return 3;
  return 4;
}

Eigen::VectorXd wheel_reward_means(const Eigen::Vector2d& raw, const WheelConfig& config) {
  Eigen::VectorXd means = Eigen::VectorXd::Constant(kWheelArms, config.peripheral.mean);
  means(0) = config.small.mean;
  const int label = wheel_label(raw, config.delta);
  if (label != 0) means(label) = config.big.mean;
  return means;
}

MorphNetwork::MorphNetwork(double epsilon, std::uint64_t seed, int depth, int width, int in_dim,
                           int out_dim) {
  if (epsilon < 0.0) throw std::invalid_argument("MorphNetwork: epsilon must be >= 0");
  if (depth < 1 || width < 1) throw std::invalid_argument("MorphNetwork: depth and width must be >= 1");
  if (epsilon == 0.0) return;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int fan_in = in_dim;
  for (int l = 0; l < depth; ++l) {
    const int fan_out = l + 1 == depth ? out_dim : width;
    const double stddev = epsilon / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = stddev * normal(rng);
    layers_.push_back(std::move(w));
    fan_in = fan_out;
  }
}

Eigen::MatrixXd MorphNetwork::apply(const Eigen::MatrixXd& inputs) const {
  if (identity()) return inputs;
  Eigen::MatrixXd h = inputs.transpose();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l] * h;
    if (l + 1 < layers_.size()) h = h.cwiseMax(0.0);
  }
  return h.transpose();
}

Eigen::MatrixXd morph(const Eigen::MatrixXd& raw_contexts, double epsilon, std::uint64_t morph_seed,
                      int depth, int width) {
  return MorphNetwork(epsilon, morph_seed, depth, width, static_cast<int>(raw_contexts.cols()),
                      static_cast<int>(raw_contexts.cols()))
      .apply(raw_contexts);
}

std::vector<WheelSample> sample_wheel(std::size_t n, const WheelConfig& config, Rng& rng) {
  config.validate();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<WheelSample> samples(n);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    WheelSample& s = samples[i];
    const double r = std::sqrt(uniform(rng));
    const double phi = 2.0 * std::numbers::pi * uniform(rng);
    s.raw_context = {r * std::cos(phi), r * std::sin(phi)};
    s.label = wheel_label(s.raw_context, config.delta);
    s.reward_means = wheel_reward_means(s.raw_context, config);
    s.rewards.resize(kWheelArms);
    for (std::size_t a = 0; a < kWheelArms; ++a) {
      const double sd = a == 0 ? config.small.std
                        : static_cast<int>(a) == s.label ? config.big.std
                                                         : config.peripheral.std;
      s.rewards(static_cast<Eigen::Index>(a)) = s.reward_means(static_cast<Eigen::Index>(a)) + sd * normal(rng);
    }
    raw.row(static_cast<Eigen::Index>(i)) = s.raw_context.transpose();
  }
  const MorphNetwork net(config.epsilon, config.morph_seed, config.morph_depth, config.morph_width);
  const Eigen::MatrixXd contexts = net.apply(raw);
  for (std::size_t i = 0; i < n; ++i) samples[i].context = contexts.row(static_cast<Eigen::Index>(i)).transpose();
  return samples;
}

void DatasetEnv::validate() const {
  if (contexts.rows() != rewards.rows())
    throw std::invalid_argument("DatasetEnv: " + std::to_string(contexts.rows()) + " context rows vs " +
                                std::to_string(rewards.rows()) + " reward rows");
  if (rewards.cols() < 2) throw std::invalid_argument("DatasetEnv: need at least 2 arms");
  if (contexts.cols() < 1) throw std::invalid_argument("DatasetEnv: need at least one feature column");
}

DatasetEnv DatasetEnv::shuffled(std::uint64_t seed) const {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(contexts.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  Rng rng(seed);
  // Explicit Fisher-Yates: std::shuffle's draw pattern is implementation-defined.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  DatasetEnv out;
  out.contexts.resize(contexts.rows(), contexts.cols());
  out.rewards.resize(rewards.rows(), rewards.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.contexts.row(static_cast<Eigen::Index>(i)) = contexts.row(order[i]);
    out.rewards.row(static_cast<Eigen::Index>(i)) = rewards.row(order[i]);
  }
  out.shuffle_seed = seed;
  return out;
}

namespace {

Eigen::MatrixXd numeric_block(const csv::Table& t, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::to_double(t.rows[i][columns[j]], t.line_numbers[i], t.header[columns[j]]);
  return m;
}

std::vector<std::size_t> all_columns(const csv::Table& t) {
  std::vector<std::size_t> c(t.header.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = i;
  return c;
}

}  // namespace

DatasetEnv load_csv_classification(const std::filesystem::path& path, const std::string& label_column,
                                   std::optional<std::uint64_t> shuffle_seed) {
  const csv::Table t = csv::read(path);
  auto it = std::find(t.header.begin(), t.header.end(), label_column);
  std::size_t label_index = 0;
  if (it != t.header.end()) {
    label_index = static_cast<std::size_t>(it - t.header.begin());
  } else {
    const long idx = csv::to_integer(label_column, 1, "label column");
    if (idx < 0 || static_cast<std::size_t>(idx) >= t.header.size())
      throw std::invalid_argument("label column '" + label_column + "' not found in " + path.string());
    label_index = static_cast<std::size_t>(idx);
  }
  if (t.rows.empty()) throw ParseError(path.string() + ": no data rows", 1);

  std::vector<std::size_t> features;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != label_index) features.push_back(c);

  std::vector<long> labels(t.rows.size());
  long max_label = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    labels[i] = csv::to_integer(t.rows[i][label_index], t.line_numbers[i], t.header[label_index]);
    if (labels[i] < 0)
      throw ParseError("line " + std::to_string(t.line_numbers[i]) + ": negative label", t.line_numbers[i]);
    max_label = std::max(max_label, labels[i]);
  }

  DatasetEnv env;
  env.contexts = numeric_block(t, features);
  env.rewards = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.rows.size()), max_label + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) env.rewards(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  env.validate();
  return shuffle_seed ? env.shuffled(*shuffle_seed) : env;
}

DatasetEnv load_csv_reward_matrix(const std::filesystem::path& context_path,
                                  const std::filesystem::path& reward_path) {
  const csv::Table ct = csv::read(context_path);
  const csv::Table rt = csv::read(reward_path);
  if (ct.rows.size() != rt.rows.size())
    throw std::invalid_argument("reward matrix: " + context_path.string() + " has " +
                                std::to_string(ct.rows.size()) + " rows but " + reward_path.string() +
                                " has " + std::to_string(rt.rows.size()));
  DatasetEnv env;
  env.contexts = numeric_block(ct, all_columns(ct));
  env.rewards = numeric_block(rt, all_columns(rt));
  env.validate();
  return env;
}

WheelEnvironment::WheelEnvironment(WheelConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<BanditRound> WheelEnvironment::rounds(std::size_t steps, Rng& rng) const {
  auto samples = sample_wheel(steps, config_, rng);
  std::vector<BanditRound> out(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    out[i].context = std::move(samples[i].context);
    out[i].rewards = std::move(samples[i].rewards);
    out[i].optimal_arm = static_cast<std::size_t>(samples[i].label);
  }
  return out;
}

DatasetEnvironment::DatasetEnvironment(DatasetEnv data) : data_(std::move(data)) { data_.validate(); }

std::vector<BanditRound> DatasetEnvironment::rounds(std::size_t steps, Rng&) const {
  std::vector<BanditRound> out(steps);
  const std::size_t n = data_.size();
  for (std::size_t t = 0; t < steps; ++t) {
    const auto row = static_cast<Eigen::Index>(t % n);
    out[t].context = data_.contexts.row(row).transpose();
    out[t].rewards = data_.rewards.row(row).transpose();
    Eigen::Index best = 0;
    out[t].rewards.maxCoeff(&best);
    out[t].optimal_arm = static_cast<std::size_t>(best);
  }
  return out;
}

}  // namespace nkb
