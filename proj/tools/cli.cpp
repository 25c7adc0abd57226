#include "cli.hpp"

#include "nkbandit/environments.hpp"
#include "nkbandit/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace nkb::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const CLI::Validator kOpenUnit = CLI::Validator(
    [](std::string& s) -> std::string {
      double v = 0;
      try {
        v = std::stod(s);
      } catch (...) {
        return "not a number: " + s;
      }
      return v > 0.0 && v < 1.0 ? "" : "value " + s + " not in (0, 1)";
    },
    "in (0, 1)");

const CLI::Validator kAboveTwo = CLI::Validator(
    [](std::string& s) -> std::string {
      double v = 0;
      try {
        v = std::stod(s);
      } catch (...) {
        return "not a number: " + s;
      }
      return v > 2.0 ? "" : "value " + s + " must be > 2";
    },
    "> 2");

const std::vector<std::string> kPolicies{"ucb", "ts", "greedy", "uniform", "linear-ts", "linear-ucb"};
const std::vector<std::string> kDistributions{"nngp", "deep-ensemble", "randomized-prior", "ntkgp"};
const std::vector<std::string> kProcesses{"gp", "tp"};

/// Agent and kernel flags shared by `run` and `sweep`.
struct AgentFlags {
  double gamma = 0.2;
  double eta = 0.1;
  double nu = 12.0;
  int depth = 2;
  double weight_variance = 2.0;
  double bias_variance = 0.01;
  std::size_t train_freq = 20;
  std::size_t init_pulls = 2;
  std::string mode = "disjoint";
  bool incremental = false;
  double prior_lambda = 0.25;
  double prior_a0 = 6.0;
  double prior_b0 = 6.0;
};

struct WheelFlags {
  int morph_depth = 5;
  int morph_width = 50;
};

void add_agent_flags(CLI::App* app, AgentFlags& f) {
  app->add_option("--gamma", f.gamma, "Kernel regularizer gamma")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--eta", f.eta, "Exploration parameter eta")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--nu", f.nu, "Student-t degrees of freedom (with --process tp)")->capture_default_str()->check(kAboveTwo);
  app->add_option("--depth", f.depth, "Hidden ReLU layers of the kernel network")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--weight-variance", f.weight_variance, "Kernel weight variance")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--bias-variance", f.bias_variance, "Kernel bias variance")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--train-freq", f.train_freq, "Rounds between model retrains")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--init-pulls", f.init_pulls, "Round-robin pulls per arm before scoring")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--mode", f.mode, "Arm model")->capture_default_str()->check(CLI::IsMember({"joint", "disjoint"}));
  app->add_flag("--incremental", f.incremental, "Grow Cholesky factors on retrain instead of refactorizing");
  app->add_option("--prior-lambda", f.prior_lambda, "Linear baselines: prior precision scale")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--prior-a0", f.prior_a0, "Linear baselines: inverse-gamma shape")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--prior-b0", f.prior_b0, "Linear baselines: inverse-gamma scale")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_wheel_flags(CLI::App* app, WheelFlags& f) {
  app->add_option("--morph-depth", f.morph_depth, "Weight layers of the morphing MLP")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--morph-width", f.morph_width, "Hidden width of the morphing MLP")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_threads_flag(CLI::App* app, std::size_t& threads) {
  app->add_option("--threads", threads, "Worker threads (0: NKBANDIT_THREADS or hardware concurrency)")
      ->capture_default_str();
}

AgentSpec make_spec(const std::string& policy, const std::string& distribution, const std::string& process,
                    const AgentFlags& f) {
  AgentSpec spec;
  if (policy == "uniform")
    spec.kind = AgentKind::Uniform;
  else if (policy == "linear-ts")
    spec.kind = AgentKind::LinearTS;
  else if (policy == "linear-ucb")
    spec.kind = AgentKind::LinearUCB;
  else {
    spec.kind = AgentKind::Kernel;
    spec.bandit.policy = parse_policy(policy);
  }
  spec.bandit.distribution = parse_distribution(distribution);
  spec.bandit.process = process == "tp" ? ProcessKind::student_t(f.nu) : ProcessKind::gaussian();
  spec.bandit.gamma = f.gamma;
  spec.bandit.eta = f.eta;
  spec.bandit.init_pulls = f.init_pulls;
  spec.bandit.train_freq = f.train_freq;
  spec.bandit.mode = parse_arm_mode(f.mode);
  spec.bandit.incremental_factorization = f.incremental;
  spec.bandit.kernel.depth = f.depth;
  spec.bandit.kernel.weight_variance = f.weight_variance;
  spec.bandit.kernel.bias_variance = f.bias_variance;
  spec.prior = {f.prior_lambda, f.prior_a0, f.prior_b0};
  return spec;
}

std::size_t resolve_threads(std::size_t threads) { return threads == 0 ? default_threads() : threads; }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  return out;
}

// Keeps only the `<command>.` keys of the root config dump.
bool dump_config(const CLI::App& root, const CLI::App* command, const std::string& path, std::ostream& out) {
  if (path.empty()) return false;
  std::istringstream all(root.config_to_str(true, false));
  const std::string prefix = command->get_name() + ".";
  std::string text;
  for (std::string line; std::getline(all, line);)
    if (line.rfind(prefix, 0) == 0) text += line + '\n';
  if (path == "-") {
    out << text;
  } else {
    auto f = open_output(path);
    f << text;
  }
  return true;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream s;
  s << std::setprecision(6) << *v;
  return s.str();
}

// ---------------------------------------------------------------- run

struct RunCommand {
  std::string env = "wheel";
  double delta = 0.5;
  double epsilon = 0.0;
  std::string data;
  std::string label_column = "label";
  std::string contexts;
  std::string rewards;
  std::string distribution = "nngp";
  std::string process = "gp";
  std::string policy = "ts";
  std::size_t steps = 5000;
  std::uint64_t seed = 0;
  std::string out = "rollout.csv";
  std::size_t threads = 0;
  AgentFlags agent;
  WheelFlags wheel;

  void add(CLI::App* app) {
    app->add_option("--env", env, "Environment")->capture_default_str()->check(CLI::IsMember({"wheel", "csv", "reward-matrix"}));
    app->add_option("--delta", delta, "Wheel inner radius")->capture_default_str()->check(kOpenUnit);
    app->add_option("--epsilon", epsilon, "Wheel morphing strength")->capture_default_str()->check(CLI::NonNegativeNumber);
    add_wheel_flags(app, wheel);
    app->add_option("--data", data, "Classification CSV (--env csv)");
    app->add_option("--label-column", label_column, "Label column name or index (--env csv)")->capture_default_str();
    app->add_option("--contexts", contexts, "Context CSV (--env reward-matrix)");
    app->add_option("--rewards", rewards, "Reward CSV (--env reward-matrix)");
    app->add_option("--distribution", distribution, "Predictive distribution")->capture_default_str()->check(CLI::IsMember(kDistributions));
    app->add_option("--process", process, "Gaussian or Student-t process")->capture_default_str()->check(CLI::IsMember(kProcesses));
    app->add_option("--policy", policy, "Policy")->capture_default_str()->check(CLI::IsMember(kPolicies));
    add_agent_flags(app, agent);
    app->add_option("--steps", steps, "Rollout length")->capture_default_str();
    app->add_option("--seed", seed, "Rollout seed")->capture_default_str();
    app->add_option("--out", out, "Rollout CSV path")->capture_default_str();
    add_threads_flag(app, threads);
  }

  std::unique_ptr<Environment> environment() const {
    if (env == "wheel") {
      WheelConfig w;
      w.morph_depth = wheel.morph_depth;
      w.morph_width = wheel.morph_width;
      return std::make_unique<WheelEnvironment>(cell_wheel(w, epsilon, delta, seed));
    }
    if (env == "csv") {
      if (data.empty()) throw UsageError("--env csv requires --data");
      return std::make_unique<DatasetEnvironment>(load_csv_classification(data, label_column, seed));
    }
    if (contexts.empty() || rewards.empty()) throw UsageError("--env reward-matrix requires --contexts and --rewards");
    return std::make_unique<DatasetEnvironment>(load_csv_reward_matrix(contexts, rewards));
  }

  int execute(const CLI::App& root, const CLI::App* app, const std::string& dump, std::ostream& o, std::ostream& e) const {
    if (dump_config(root, app, dump, o)) return kExitOk;
    const auto environment_ptr = environment();
    const AgentSpec spec = make_spec(policy, distribution, process, agent);
    auto agent_ptr = make_agent(spec, environment_ptr->arms(), environment_ptr->context_dim());
    const RolloutLog log = run_rollout(*environment_ptr, *agent_ptr, steps, seed);
    {
      auto f = open_output(out);
      write_rollout_csv(log, f);
    }
    const auto timing = timing_stats(log);
    o << std::setprecision(10) << "agent=" << spec.fingerprint() << " steps=" << log.steps.size()
      << " cum_reward=" << log.cumulative_reward() << " cum_regret=" << log.cumulative_regret();
    if (environment_ptr->interior_arm()) o << " pacc=" << format_optional(peripheral_accuracy(log, 0));
    if (timing)
      o << " time_min=" << timing->min << " time_median=" << timing->median << " time_max=" << timing->max;
    o << '\n';
    if (log.error) {
      e << "rollout aborted: " << *log.error << '\n';
      return kExitNumerical;
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- sweep

struct SweepCommand {
  std::vector<double> epsilons{0.0, 2.5, 5.0, 7.5, 10.0};
  std::vector<double> deltas{0.5, 0.7, 0.9, 0.95, 0.99};
  std::size_t runs = 10;
  std::size_t steps = 5000;
  std::uint64_t seed = 0;
  std::vector<std::string> distributions{"nngp"};
  std::vector<std::string> processes{"gp"};
  std::vector<std::string> policies{"ts"};
  std::string out = "grid.csv";
  std::size_t threads = 0;
  AgentFlags agent;
  WheelFlags wheel;

  void add(CLI::App* app) {
    app->add_option("--epsilons", epsilons, "Morphing strengths (comma list, ascending)")->delimiter(',')->capture_default_str();
    app->add_option("--deltas", deltas, "Inner radii (comma list, ascending)")->delimiter(',')->capture_default_str()->check(kOpenUnit);
    app->add_option("--runs", runs, "Runs per cell")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--steps", steps, "Rollout length")->capture_default_str();
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    app->add_option("--distribution", distributions, "Predictive distributions (comma list)")->delimiter(',')->capture_default_str()->check(CLI::IsMember(kDistributions));
    app->add_option("--process", processes, "Processes (comma list)")->delimiter(',')->capture_default_str()->check(CLI::IsMember(kProcesses));
    app->add_option("--policy", policies, "Policies (comma list)")->delimiter(',')->capture_default_str()->check(CLI::IsMember(kPolicies));
    add_agent_flags(app, agent);
    add_wheel_flags(app, wheel);
    app->add_option("--out", out, "Grid CSV path")->capture_default_str();
    add_threads_flag(app, threads);
  }

  GridSpec spec() const {
    GridSpec g;
    g.epsilons = epsilons;
    g.deltas = deltas;
    g.runs = runs;
    g.steps = steps;
    g.master_seed = seed;
    g.wheel.morph_depth = wheel.morph_depth;
    g.wheel.morph_width = wheel.morph_width;
    g.configs.clear();
    std::vector<std::string> seen;
    for (const auto& policy : policies)
      for (const auto& distribution : distributions)
        for (const auto& process : processes) {
          AgentSpec s = make_spec(policy, distribution, process, agent);
          const std::string key = s.policy_label() + s.distribution_label() + s.process_label();
          if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
          seen.push_back(key);
          g.configs.push_back(s);
        }
    return g;
  }

  int execute(const CLI::App& root, const CLI::App* app, const std::string& dump, std::ostream& o, std::ostream& e) const {
    if (dump_config(root, app, dump, o)) return kExitOk;
    GridSpec g = spec();
    try {
      g.validate();
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
    const auto rows = grid_sweep(g, resolve_threads(threads));
    {
      auto f = open_output(out);
      write_grid_csv(rows, g, f);
    }
    std::size_t failures = 0;
    for (const auto& r : rows)
      if (r.error) {
        ++failures;
        e << "eps=" << r.epsilon << " delta=" << r.delta << " config=" << r.config << " run=" << r.run
          << ": " << *r.error << '\n';
      }
    o << "rows=" << rows.size() << " configs=" << g.configs.size() << " failures=" << failures << '\n';
    return failures == 0 ? kExitOk : kExitNumerical;
  }
};

// ---------------------------------------------------------------- gen-wheel

struct GenWheelCommand {
  std::size_t n = 1000;
  double delta = 0.5;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string out = "wheel.csv";
  WheelFlags wheel;

  void add(CLI::App* app) {
    app->add_option("--n", n, "Samples")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--delta", delta, "Inner radius")->capture_default_str()->check(kOpenUnit);
    app->add_option("--epsilon", epsilon, "Morphing strength")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--seed", seed, "Seed")->capture_default_str();
    add_wheel_flags(app, wheel);
    app->add_option("--out", out, "Dataset CSV path")->capture_default_str();
  }

  int execute(const CLI::App& root, const CLI::App* app, const std::string& dump, std::ostream& o, std::ostream&) const {
    if (dump_config(root, app, dump, o)) return kExitOk;
    WheelConfig w;
    w.morph_depth = wheel.morph_depth;
    w.morph_width = wheel.morph_width;
    w = cell_wheel(w, epsilon, delta, seed);
    Rng rng(mix_seed(seed, 0));
    const auto samples = sample_wheel(n, w, rng);
    auto f = open_output(out);
    const auto m = samples.front().context.size();
    f << "raw_x1,raw_x2";
    for (Eigen::Index j = 0; j < m; ++j) f << ",ctx_" << j + 1;
    f << ",label\n" << std::setprecision(17);
    for (const auto& s : samples) {
      f << s.raw_context.x() << ',' << s.raw_context.y();
      for (Eigen::Index j = 0; j < m; ++j) f << ',' << s.context(j);
      f << ',' << s.label << '\n';
    }
    o << "samples=" << n << " out=" << out << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- complexity

struct ComplexityCommand {
  std::vector<double> epsilons{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t seeds = 10;
  double delta = 0.5;
  double gamma = 1e-3;
  int depth = 2;
  double weight_variance = 2.0;
  double bias_variance = 0.01;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out = "complexity.csv";
  WheelFlags wheel;

  void add(CLI::App* app) {
    app->add_option("--epsilons", epsilons, "Morphing strengths (comma list, ascending)")->delimiter(',')->capture_default_str();
    app->add_option("--n-train", n_train, "Training samples")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--n-test", n_test, "Test samples")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seeds", seeds, "Repetitions per epsilon")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--delta", delta, "Inner radius")->capture_default_str()->check(kOpenUnit);
    app->add_option("--gamma", gamma, "Ridge regularizer")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--depth", depth, "Hidden ReLU layers of the kernel network")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--weight-variance", weight_variance, "Kernel weight variance")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--bias-variance", bias_variance, "Kernel bias variance")->capture_default_str()->check(CLI::NonNegativeNumber);
    add_wheel_flags(app, wheel);
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    add_threads_flag(app, threads);
    app->add_option("--out", out, "Curve CSV path")->capture_default_str();
  }

  int execute(const CLI::App& root, const CLI::App* app, const std::string& dump, std::ostream& o, std::ostream&) const {
    if (dump_config(root, app, dump, o)) return kExitOk;
    if (!std::is_sorted(epsilons.begin(), epsilons.end())) throw UsageError("--epsilons must be ascending");
    ComplexitySpec spec;
    spec.epsilons = epsilons;
    spec.n_train = n_train;
    spec.n_test = n_test;
    spec.seeds = seeds;
    spec.delta = delta;
    spec.gamma = gamma;
    spec.kernel.depth = depth;
    spec.kernel.weight_variance = weight_variance;
    spec.kernel.bias_variance = bias_variance;
    spec.master_seed = seed;
    spec.wheel.morph_depth = wheel.morph_depth;
    spec.wheel.morph_width = wheel.morph_width;
    const auto curve = complexity_check(spec, resolve_threads(threads));
    auto f = open_output(out);
    f << "epsilon,mean_accuracy,std_accuracy,failures\n" << std::setprecision(17);
    for (const auto& p : curve) {
      f << p.epsilon << ',' << p.mean_accuracy << ',' << p.std_accuracy << ',' << p.failures << '\n';
      o << std::setprecision(6) << "epsilon=" << p.epsilon << " accuracy=" << p.mean_accuracy << " +- "
        << p.std_accuracy << '\n';
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- report

double rollout_cum_reward(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw UsageError("'" + path + "' is empty");
  const auto header = [&] {
    std::vector<std::string> h;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) h.push_back(f);
    return h;
  }();
  const auto it = std::find(header.begin(), header.end(), "reward");
  if (it == header.end()) throw UsageError("'" + path + "' has no reward column");
  const auto col = static_cast<std::size_t>(it - header.begin());
  double sum = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(ss, field, ',')) throw UsageError(path + ": line " + std::to_string(lineno) + " is short");
    try {
      sum += std::stod(field);
    } catch (...) {
      throw UsageError(path + ": line " + std::to_string(lineno) + " has a non-numeric reward");
    }
  }
  return sum;
}

struct MeanStd {
  double mean = 0;
  double std = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct ReportCommand {
  std::vector<std::string> uniform;
  std::vector<std::string> best;
  std::vector<std::string> algs;
  std::string grid;
  std::string out = "-";

  void add(CLI::App* app) {
    app->add_option("--uniform", uniform, "Rollout CSV of the uniform policy (repeatable or comma list)")
        ->delimiter(',')
        ->allow_extra_args(false);
    app->add_option("--best", best, "Rollout CSV of the best algorithm (repeatable or comma list)")
        ->delimiter(',')
        ->allow_extra_args(false);
    app->add_option("algs", algs, "Rollout CSVs to normalize, as [label=]path; unlabeled files group by file stem");
    app->add_option("--grid", grid, "Grid CSV to aggregate into per-config mean and std");
    app->add_option("--out", out, "Report CSV path ('-' for standard output)")->capture_default_str();
  }

  void report_grid(std::ostream& f) const {
    std::ifstream in(grid);
    if (!in) throw UsageError("cannot open '" + grid + "'");
    std::string line;
    std::getline(in, line);
    if (line.rfind("epsilon,delta,distribution,process,policy,run,pacc,cum_reward", 0) != 0)
      throw UsageError("'" + grid + "' is not a grid table");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) fields.push_back(x);
      if (fields.size() != 8) throw UsageError("malformed grid row: " + line);
      const std::string key = fields[0] + ',' + fields[1] + ',' + fields[2] + ',' + fields[3] + ',' + fields[4];
      if (!groups.count(key)) order.push_back(key);
      auto& g = groups[key];
      if (fields[6] != "NA") g.first.push_back(std::stod(fields[6]));
      if (fields[7] != "NA") g.second.push_back(std::stod(fields[7]));
    }
    f << "epsilon,delta,distribution,process,policy,runs,pacc_mean,pacc_std,cum_reward_mean,cum_reward_std\n"
      << std::setprecision(10);
    for (const auto& key : order) {
      const auto& g = groups.at(key);
      const auto p = mean_std(g.first);
      const auto c = mean_std(g.second);
      f << key << ',' << g.second.size() << ',' << p.mean << ',' << p.std << ',' << c.mean << ',' << c.std << '\n';
    }
  }

  void report_rollouts(std::ostream& f) const {
    if (uniform.empty() || best.empty()) throw UsageError("report needs --uniform and --best rollout files");
    std::vector<double> u, b;
    for (const auto& p : uniform) u.push_back(rollout_cum_reward(p));
    for (const auto& p : best) b.push_back(rollout_cum_reward(p));
    const double u_mean = mean_std(u).mean;
    const double b_mean = mean_std(b).mean;
    if (b_mean == u_mean) throw UsageError("best and uniform cumulative rewards coincide");
    std::map<std::string, std::vector<double>> groups;
    std::vector<std::string> order;
    for (const auto& spec : algs) {
      std::string label, path = spec;
      if (const auto eq = spec.find('='); eq != std::string::npos) {
        label = spec.substr(0, eq);
        path = spec.substr(eq + 1);
      } else {
        label = std::filesystem::path(path).stem().string();
      }
      if (!groups.count(label)) order.push_back(label);
      groups[label].push_back(rollout_cum_reward(path));
    }
    f << "label,runs,cum_reward_mean,cum_reward_std,normalized_mean,normalized_std\n" << std::setprecision(10);
    for (const auto& label : order) {
      const auto& rewards = groups.at(label);
      std::vector<double> norm;
      for (double r : rewards) norm.push_back(normalized_cumulative_reward(r, u_mean, b_mean));
      const auto c = mean_std(rewards);
      const auto n = mean_std(norm);
      f << label << ',' << rewards.size() << ',' << c.mean << ',' << c.std << ',' << n.mean << ',' << n.std << '\n';
    }
  }

  int execute(const CLI::App& root, const CLI::App* app, const std::string& dump, std::ostream& o, std::ostream&) const {
    if (dump_config(root, app, dump, o)) return kExitOk;
    std::ostringstream buffer;
    if (!grid.empty())
      report_grid(buffer);
    else
      report_rollouts(buffer);
    if (out == "-") {
      o << buffer.str();
    } else {
      auto f = open_output(out);
      f << buffer.str();
    }
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-kernel contextual bandits: rollouts, sweeps and benchmark utilities", "nkbandit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read flags from an INI/TOML file (keys like run.gamma); command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  std::string dump;
  app.add_option("--dump-config", dump, "Write the effective flags of the command as a config file ('-' for standard output) and exit")
      ->configurable(false);

  RunCommand run_cmd;
  SweepCommand sweep_cmd;
  GenWheelCommand gen_cmd;
  ComplexityCommand complexity_cmd;
  ReportCommand report_cmd;

  auto* run_app = app.add_subcommand("run", "Run one rollout and write its log as CSV");
  run_cmd.add(run_app);
  auto* sweep_app = app.add_subcommand("sweep", "Run an (epsilon, delta) grid of wheel rollouts");
  sweep_cmd.add(sweep_app);
  auto* gen_app = app.add_subcommand("gen-wheel", "Write a (morphed) wheel dataset as CSV");
  gen_cmd.add(gen_app);
  auto* complexity_app = app.add_subcommand("complexity", "Supervised kernel-ridge accuracy vs morphing strength");
  complexity_cmd.add(complexity_app);
  auto* report_app = app.add_subcommand("report", "Normalize rollout rewards or aggregate a grid table");
  report_cmd.add(report_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (run_app->parsed()) return run_cmd.execute(app, run_app, dump, out, err);
    if (sweep_app->parsed()) return sweep_cmd.execute(app, sweep_app, dump, out, err);
    if (gen_app->parsed()) return gen_cmd.execute(app, gen_app, dump, out, err);
    if (complexity_app->parsed()) return complexity_cmd.execute(app, complexity_app, dump, out, err);
    if (report_app->parsed()) return report_cmd.execute(app, report_app, dump, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace nkb::cli
