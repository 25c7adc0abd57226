#include "nkbandit/harness.hpp"

#include "nkbandit/spd.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nkb {

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

double RolloutLog::cumulative_reward() const {
  double s = 0;
  for (const auto& r : steps) s += r.reward;
  return s;
}

double RolloutLog::cumulative_optimal_reward() const {
  double s = 0;
  for (const auto& r : steps) s += r.optimal_reward;
  return s;
}

double RolloutLog::total_time() const {
  double s = 0;
  for (const auto& r : steps) s += r.round_time;
  return s;
}

RolloutLog run_rollout(const Environment& env, Agent& agent, std::size_t steps, std::uint64_t seed) {
  RolloutLog log;
  log.seed = seed;
  log.fingerprint = agent.name();
  Rng env_rng(mix_seed(seed, 0));
  Rng agent_rng(mix_seed(seed, 1));
  const std::vector<BanditRound> tape = env.rounds(steps, env_rng);
  log.steps.reserve(steps);
  using clock = std::chrono::steady_clock;
  for (const BanditRound& round : tape) {
    StepRecord rec;
    const auto start = clock::now();
    try {
      rec.arm = agent.select(round.context, agent_rng);
      if (rec.arm >= static_cast<std::size_t>(round.rewards.size()))
        throw std::out_of_range("agent chose arm " + std::to_string(rec.arm) + " of " +
                                std::to_string(round.rewards.size()));
      rec.reward = round.rewards(static_cast<Eigen::Index>(rec.arm));
      agent.observe(round.context, rec.arm, rec.reward);
    } catch (const std::exception& e) {
      log.error = "step " + std::to_string(log.steps.size() + 1) + ": " + e.what();
      break;
    }
    rec.round_time = std::chrono::duration<double>(clock::now() - start).count();
    rec.optimal_arm = round.optimal_arm;
    rec.optimal_reward = round.rewards(static_cast<Eigen::Index>(round.optimal_arm));
    log.steps.push_back(rec);
  }
  return log;
}

std::optional<double> peripheral_accuracy(const RolloutLog& log, std::size_t interior_arm) {
  std::size_t peripheral = 0;
  std::size_t hits = 0;
  for (const auto& r : log.steps) {
    if (r.optimal_arm == interior_arm) continue;
    ++peripheral;
    if (r.arm == r.optimal_arm) ++hits;
  }
  if (peripheral == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(peripheral);
}

double normalized_cumulative_reward(double alg, double uniform, double best) {
  const double denom = best - uniform;
  if (denom == 0.0)
    throw std::domain_error("normalized_cumulative_reward: best and uniform rewards coincide");
  return (alg - uniform) / denom;
}

std::optional<TimingStats> timing_stats(const RolloutLog& log) {
  if (log.steps.empty()) return std::nullopt;
  std::vector<double> t;
  t.reserve(log.steps.size());
  for (const auto& r : log.steps) t.push_back(r.round_time);
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  const double median = n % 2 == 1 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
  return TimingStats{t.front(), median, t.back()};
}

void write_rollout_csv(const RolloutLog& log, std::ostream& out) {
  out << "step,arm,reward,opt_arm,opt_reward,round_time_s\n";
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& r = log.steps[i];
    out << i + 1 << ',' << r.arm << ',' << shortest(r.reward) << ',' << r.optimal_arm << ','
        << shortest(r.optimal_reward) << ',' << shortest(r.round_time) << '\n';
  }
}

std::string AgentSpec::policy_label() const {
  switch (kind) {
    case AgentKind::Kernel: return std::string(to_string(bandit.policy));
    case AgentKind::Uniform: return "uniform";
    case AgentKind::LinearTS: return "linear-ts";
    case AgentKind::LinearUCB: return "linear-ucb";
  }
  return "?";
}

std::string AgentSpec::distribution_label() const {
  return kind == AgentKind::Kernel ? std::string(to_string(bandit.distribution)) : "none";
}

std::string AgentSpec::process_label() const {
  if (kind != AgentKind::Kernel) return "none";
  return bandit.process.is_student_t() ? "tp" : "gp";
}

std::string AgentSpec::fingerprint() const {
  std::ostringstream s;
  s << policy_label() << '/' << distribution_label() << '/' << process_label();
  if (kind == AgentKind::Kernel) {
    s << "/mode=" << to_string(bandit.mode) << "/gamma=" << bandit.gamma << "/eta=" << bandit.eta
      << "/iota=" << bandit.init_pulls << "/f=" << bandit.train_freq << "/depth=" << bandit.kernel.depth
      << "/sw2=" << bandit.kernel.weight_variance << "/sb2=" << bandit.kernel.bias_variance;
    if (bandit.process.is_student_t()) s << "/nu=" << bandit.process.nu;
  } else if (kind != AgentKind::Uniform) {
    s << "/eta=" << bandit.eta << "/lambda=" << prior.lambda << "/a0=" << prior.a0 << "/b0=" << prior.b0;
  }
  return s.str();
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, std::size_t arms, std::size_t context_dim) {
  switch (spec.kind) {
    case AgentKind::Kernel: {
      BanditConfig cfg = spec.bandit;
      cfg.arms = arms;
      return std::make_unique<NkBandit>(cfg, context_dim);
    }
    case AgentKind::Uniform:
      return std::make_unique<UniformAgent>(arms);
    case AgentKind::LinearTS:
      return std::make_unique<LinearAgent>(arms, context_dim, LinearPolicy::TS, spec.bandit.eta, spec.prior);
    case AgentKind::LinearUCB:
      return std::make_unique<LinearAgent>(arms, context_dim, LinearPolicy::UCB, spec.bandit.eta, spec.prior);
  }
  throw std::invalid_argument("make_agent: unknown agent kind");
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t default_threads() {
  if (const char* env = std::getenv("NKBANDIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void GridSpec::validate() const {
  if (epsilons.empty() || deltas.empty()) throw std::invalid_argument("GridSpec: axes must be nonempty");
  if (configs.empty()) throw std::invalid_argument("GridSpec: need at least one agent config");
  if (runs < 1) throw std::invalid_argument("GridSpec: runs must be >= 1");
  if (!std::is_sorted(epsilons.begin(), epsilons.end()) || !std::is_sorted(deltas.begin(), deltas.end()))
    throw std::invalid_argument("GridSpec: axes must be ascending");
  for (double e : epsilons)
    if (!(e >= 0)) throw std::invalid_argument("GridSpec: epsilons must be >= 0");
  for (double d : deltas)
    if (!(d > 0 && d < 1)) throw std::invalid_argument("GridSpec: deltas must lie in (0, 1)");
}

std::uint64_t cell_run_seed(std::uint64_t master_seed, std::size_t cell, std::size_t run) {
  return mix_seed(master_seed, cell, run);
}

WheelConfig cell_wheel(const WheelConfig& base, double epsilon, double delta, std::uint64_t seed) {
  WheelConfig w = base;
  w.epsilon = epsilon;
  w.delta = delta;
  w.morph_seed = splitmix64(seed ^ 0x6d6f7270686e6574ULL);
  return w;
}

std::vector<GridRow> grid_sweep(const GridSpec& spec, std::size_t threads) {
  spec.validate();
  const std::size_t n_delta = spec.deltas.size();
  const std::size_t cells = spec.epsilons.size() * n_delta;
  const std::size_t n_cfg = spec.configs.size();
  std::vector<GridRow> rows(cells * n_cfg * spec.runs);
  parallel_for(rows.size(), threads, [&](std::size_t index) {
    const std::size_t run = index % spec.runs;
    const std::size_t cfg = (index / spec.runs) % n_cfg;
    const std::size_t cell = index / (spec.runs * n_cfg);
    GridRow& row = rows[index];
    row.epsilon = spec.epsilons[cell / n_delta];
    row.delta = spec.deltas[cell % n_delta];
    row.config = cfg;
    row.run = run;
    const std::uint64_t seed = cell_run_seed(spec.master_seed, cell, run);
    try {
      const WheelEnvironment env(cell_wheel(spec.wheel, row.epsilon, row.delta, seed));
      auto agent = make_agent(spec.configs[cfg], env.arms(), env.context_dim());
      const RolloutLog log = run_rollout(env, *agent, spec.steps, seed);
      row.pacc = peripheral_accuracy(log, 0);
      row.cum_reward = log.cumulative_reward();
      row.error = log.error;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

void write_grid_csv(const std::vector<GridRow>& rows, const GridSpec& spec, std::ostream& out) {
  out << "epsilon,delta,distribution,process,policy,run,pacc,cum_reward\n";
  for (const auto& r : rows) {
    const AgentSpec& a = spec.configs.at(r.config);
    out << shortest(r.epsilon) << ',' << shortest(r.delta) << ',' << a.distribution_label() << ',' << a.process_label() << ','
        << a.policy_label() << ',' << r.run << ',';
    if (r.pacc && !r.error)
      out << shortest(*r.pacc);
    else
      out << "NA";
    out << ',';
    if (r.error)
      out << "NA";
    else
      out << shortest(r.cum_reward);
    out << '\n';
  }
}

double ridge_classification_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                                     const Eigen::MatrixXd& test_x, const std::vector<int>& test_labels,
                                     std::size_t classes, const KernelConfig& kernel, double gamma) {
  if (static_cast<std::size_t>(train_x.rows()) != train_labels.size() ||
      static_cast<std::size_t>(test_x.rows()) != test_labels.size())
    throw std::invalid_argument("ridge_classification_accuracy: label counts do not match inputs");
  if (test_labels.empty()) throw std::invalid_argument("ridge_classification_accuracy: empty test set");
  const auto n = train_x.rows();
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(classes));
  for (Eigen::Index i = 0; i < n; ++i) targets(i, train_labels[static_cast<std::size_t>(i)]) = 1.0;
  const auto train = gram(train_x, kernel);
  const auto f = SpdFactorization<double>::factorize(train.nngp, gamma);
  const Eigen::MatrixXd weights = f.solve(targets);
  const Eigen::MatrixXd scores = gram(test_x, train_x, kernel).nngp * weights;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    if (best == test_labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

std::vector<ComplexityPoint> complexity_check(const ComplexitySpec& spec, std::size_t threads) {
  if (spec.seeds < 1) throw std::invalid_argument("complexity_check: need at least one seed");
  if (!std::is_sorted(spec.epsilons.begin(), spec.epsilons.end()))
    throw std::invalid_argument("complexity_check: epsilons must be ascending");
  const std::size_t n_eps = spec.epsilons.size();
  std::vector<std::optional<double>> acc(n_eps * spec.seeds);
  parallel_for(acc.size(), threads, [&](std::size_t index) {
    const std::size_t e = index / spec.seeds;
    const std::size_t s = index % spec.seeds;
    // Same samples and morph network for every epsilon of a given seed.
    const std::uint64_t seed = mix_seed(spec.master_seed, s);
    WheelConfig w = cell_wheel(spec.wheel, spec.epsilons[e], spec.delta, seed);
    Rng rng(mix_seed(seed, 0));
    const auto samples = sample_wheel(spec.n_train + spec.n_test, w, rng);
    const auto dim = samples.front().context.size();
    Eigen::MatrixXd train_x(static_cast<Eigen::Index>(spec.n_train), dim);
    Eigen::MatrixXd test_x(static_cast<Eigen::Index>(spec.n_test), dim);
    std::vector<int> train_y(spec.n_train), test_y(spec.n_test);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (i < spec.n_train) {
        train_x.row(static_cast<Eigen::Index>(i)) = samples[i].context.transpose();
        train_y[i] = samples[i].label;
      } else {
        test_x.row(static_cast<Eigen::Index>(i - spec.n_train)) = samples[i].context.transpose();
        test_y[i - spec.n_train] = samples[i].label;
      }
    }
    try {
      acc[index] = ridge_classification_accuracy(train_x, train_y, test_x, test_y, kWheelArms, spec.kernel,
                                                 spec.gamma);
    } catch (const NumericalError&) {
      acc[index] = std::nullopt;
    }
  });
  std::vector<ComplexityPoint> out(n_eps);
  for (std::size_t e = 0; e < n_eps; ++e) {
    ComplexityPoint& p = out[e];
    p.epsilon = spec.epsilons[e];
    std::vector<double> ok;
    for (std::size_t s = 0; s < spec.seeds; ++s) {
      if (const auto& a = acc[e * spec.seeds + s])
        ok.push_back(*a);
      else
        ++p.failures;
    }
    if (ok.empty()) {
      p.mean_accuracy = std::nan("");
      continue;
    }
    double sum = 0;
    for (double v : ok) sum += v;
    p.mean_accuracy = sum / static_cast<double>(ok.size());
    double ss = 0;
    for (double v : ok) ss += (v - p.mean_accuracy) * (v - p.mean_accuracy);
    p.std_accuracy = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
  }
  return out;
}

}  // namespace nkb
