// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `--only 3,7` runs a subset.
#include "nkbandit/harness.hpp"
#include "nkbandit/predictive.hpp"
#include "oracles/arccos_reference.hpp"
#include "oracles/dense_reference.hpp"
#include "oracles/finite_network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct MeanStd {
  double mean = 0;
  double std = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return m;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_std(a).mean, mb = mean_std(b).mean;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) { return pearson(ranks(a), ranks(b)); }

nkb::KernelConfig relu(int depth, double sw2, double sb2) {
  nkb::KernelConfig c;
  c.depth = depth;
  c.weight_variance = sw2;
  c.bias_variance = sb2;
  return c;
}

nkb::AgentSpec kernel_agent(nkb::DistributionKind kind) {
  nkb::AgentSpec s;
  s.kind = nkb::AgentKind::Kernel;
  s.bandit.distribution = kind;
  s.bandit.policy = nkb::Policy::TS;
  s.bandit.gamma = 0.2;
  s.bandit.eta = 0.1;
  s.bandit.train_freq = 20;
  return s;
}

std::vector<double> grid_pacc(const std::vector<nkb::GridRow>& rows, std::size_t config, Outcome& o) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.config != config) continue;
    o.require(!r.error, "run " + std::to_string(r.run) + " aborted: " + r.error.value_or(""));
    if (r.pacc) v.push_back(*r.pacc);
  }
  return v;
}

class OracleAgent : public nkb::Agent {
 public:
  explicit OracleAgent(double delta) : delta_(delta) {}
  std::size_t select(const Eigen::VectorXd& x, nkb::Rng&) override {
    return static_cast<std::size_t>(nkb::wheel_label(Eigen::Vector2d(x(0), x(1)), delta_));
  }
  void observe(const Eigen::VectorXd&, std::size_t, double) override {}
  std::string name() const override { return "oracle"; }

 private:
  double delta_;
};

// ---------------------------------------------------------------------------

void kernel_closed_form(Outcome& o) {
  const auto cfg = relu(1, 2.0, 0.0);
  const auto off = nkb::kernel_entry(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), cfg);
  const auto diag = nkb::kernel_entry(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0), cfg);
  const double inv_pi = 1.0 / std::numbers::pi;
  const double err = std::max({std::abs(off.nngp - inv_pi), std::abs(off.ntk - inv_pi), std::abs(diag.nngp - 1.0),
                               std::abs(diag.ntk - 2.0)});
  o.detail << "off=(" << off.nngp << ", " << off.ntk << ") diag=(" << diag.nngp << ", " << diag.ntk
           << ") max_err=" << err;
  o.require(err <= 1e-10, "closed form");
}

void monte_carlo_kernel(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(10, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  x.rowwise().normalize();
  const double sw2 = 2.0, sb2 = 0.01;
  for (int depth : {1, 2}) {
    const auto exact = nkb::gram(x, relu(depth, sw2, sb2)).nngp;
    const auto mc = oracle::finite_network_covariance(x, depth, sw2, sb2, 8192, 100, 7 + depth);
    double diag_rel = 0, off_abs = 0;
    for (Eigen::Index i = 0; i < 10; ++i)
      for (Eigen::Index j = 0; j < 10; ++j) {
        if (i == j)
          diag_rel = std::max(diag_rel, std::abs(mc(i, i) - exact(i, i)) / exact(i, i));
        else
          off_abs = std::max(off_abs, std::abs(mc(i, j) - exact(i, j)));
      }
    o.detail << "L=" << depth << ": diag_rel=" << diag_rel << " off_abs=" << off_abs << "; ";
    o.require(diag_rel <= 0.05 && off_abs <= 0.05, "L=" + std::to_string(depth));
  }
}

void ridge_equivalence(Outcome& o) {
  const auto cfg = relu(0, 1.0, 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    Eigen::MatrixXd x(5, 3);
    Eigen::VectorXd y(5), t(3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (auto& v : y) v = normal(rng);
    for (auto& v : t) v = normal(rng);
    const auto train = nkb::gram(x, cfg);
    const auto m = nkb::gp_moments(nkb::DistributionKind::NNGP, train, nkb::cross_kernels(t, train),
                                   nkb::kernel_entry(t, t, cfg), y, 0.2);
    const auto r = oracle::bayesian_ridge(x / std::sqrt(3.0), y, t / std::sqrt(3.0), 0.2);
    worst = std::max({worst, std::abs(m.mean - r.mean), std::abs(m.variance - r.variance)});
  }
  o.detail << "20 instances, max_abs_err=" << worst;
  o.require(worst <= 1e-8, "ridge");
}

void table_cross_check(Outcome& o) {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  const Eigen::Vector2d y(1, -1), t(1, 0);
  const auto cfg = relu(1, 2.0, 0.0);
  const auto train = nkb::gram(x, cfg);
  const auto cross = nkb::cross_kernels(t, train);
  const auto diag = nkb::kernel_entry(t, t, cfg);
  const auto g = oracle::arccos_gram(x, x, 1, 2.0, 0.0);
  const auto c = oracle::arccos_gram(t.transpose(), x, 1, 2.0, 0.0);
  const auto d = oracle::arccos_kernel(t, t, 1, 2.0, 0.0);
  const oracle::Instance inst{g.nngp, g.ntk, c.nngp.row(0).transpose(), c.ntk.row(0).transpose(), d.nngp, d.ntk, y};
  double worst = 0;
  for (auto kind : {nkb::DistributionKind::NNGP, nkb::DistributionKind::DeepEnsemble,
                    nkb::DistributionKind::RandomizedPrior, nkb::DistributionKind::NTKGP}) {
    const auto m = nkb::gp_moments(kind, train, cross, diag, Eigen::VectorXd(y), 0.2);
    const auto r = oracle::dense_moments(std::string(nkb::to_string(kind)), inst, 0.2);
    worst = std::max({worst, std::abs(m.mean - r.mean), std::abs(m.variance - r.variance)});
    if (kind == nkb::DistributionKind::NNGP) o.require(m.variance <= diag.nngp, "NNGP variance <= prior");
    if (kind == nkb::DistributionKind::NTKGP) o.require(m.variance <= diag.ntk, "NTKGP variance <= prior");
  }
  o.detail << "max_abs_err=" << worst;
  o.require(worst <= 1e-10, "explicit-inverse reference");
}

void tp_contract(Outcome& o) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(6, 2);
  Eigen::VectorXd y(6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (auto& v : y) v = normal(rng);
  const Eigen::Vector2d t(0.4, -0.2);
  const nkb::KernelConfig cfg{};
  const auto train = nkb::gram(x, cfg);
  const auto cross = nkb::cross_kernels(t, train);
  const auto diag = nkb::kernel_entry(t, t, cfg);
  const auto gp = nkb::gp_moments(nkb::DistributionKind::NNGP, train, cross, diag, y, 0.2);
  const auto tp = nkb::tp_moments(train.nngp, cross.nngp, diag.nngp, y, 0.2, 12.0);
  const auto wide = nkb::tp_moments(train.nngp, cross.nngp, diag.nngp, y, 0.2, 1e6);
  const double ratio = wide.variance / gp.variance;
  o.detail << "dof=" << tp.dof.value_or(-1) << " mean_diff=" << tp.mean - gp.mean
           << " ratio(nu=1e6)=" << std::setprecision(10) << ratio;
  o.require(tp.dof && *tp.dof == 18.0, "dof = nu + n");
  o.require(tp.mean == gp.mean && wide.mean == gp.mean, "TP mean == GP mean");
  o.require(std::abs(ratio - 1.0) <= 1e-3, "variance ratio");
}

void wheel_sanity(Outcome& o) {
  nkb::WheelConfig w;
  w.delta = 0.5;
  const nkb::WheelEnvironment env(w);
  nkb::UniformAgent uniform(5);
  const auto log = nkb::run_rollout(env, uniform, 14000, 11);
  std::size_t peripheral = 0;
  for (const auto& s : log.steps) peripheral += s.optimal_arm != 0;
  const double u = nkb::peripheral_accuracy(log).value_or(-1);
  OracleAgent oracle(0.5);
  const double best = nkb::peripheral_accuracy(nkb::run_rollout(env, oracle, 5000, 12)).value_or(-1);
  nkb::Rng rng(13);
  const auto samples = nkb::sample_wheel(100000, w, rng);
  std::size_t outer = 0;
  for (const auto& s : samples) outer += s.label != 0;
  const double fraction = static_cast<double>(outer) / 1e5;
  o.detail << "uniform pacc=" << u << " over " << peripheral << " peripheral steps, oracle pacc=" << best
           << ", outer label fraction=" << fraction;
  o.require(peripheral >= 10000, "peripheral step count");
  o.require(std::abs(u - 0.2) <= 0.05, "uniform pacc");
  o.require(best == 1.0, "oracle pacc");
  o.require(std::abs(fraction - (1 - 0.25)) <= 0.01, "label fraction");
}

void easy_wheel(Outcome& o) {
  nkb::GridSpec spec;
  spec.epsilons = {0.0};
  spec.deltas = {0.5};
  spec.configs = {kernel_agent(nkb::DistributionKind::NNGP)};
  spec.runs = 5;
  spec.steps = 2000;
  const auto rows = nkb::grid_sweep(spec, nkb::default_threads());
  const auto pacc = grid_pacc(rows, 0, o);
  const auto m = mean_std(pacc);
  o.detail << "NNGP-GP-TS mean pacc=" << m.mean << " +- " << m.std << " (runs:";
  for (double p : pacc) o.detail << ' ' << p;
  o.detail << ")";
  o.require(pacc.size() == 5 && m.mean >= 0.80, "mean pacc >= 0.80");
}

void exploration_ordering(Outcome& o) {
  nkb::GridSpec spec;
  spec.epsilons = {0.0};
  spec.deltas = {0.95};
  spec.configs = {kernel_agent(nkb::DistributionKind::NTKGP), kernel_agent(nkb::DistributionKind::DeepEnsemble)};
  spec.runs = 10;
  spec.steps = 5000;
  const auto rows = nkb::grid_sweep(spec, nkb::default_threads());
  const auto ntk = mean_std(grid_pacc(rows, 0, o));
  const auto de = mean_std(grid_pacc(rows, 1, o));
  o.detail << "NTKGP-TS pacc=" << ntk.mean << " +- " << ntk.std << ", DeepEnsemble-TS pacc=" << de.mean << " +- "
           << de.std;
  o.require(ntk.mean >= de.mean, "NTKGP >= DeepEnsemble");
}

void complexity_monotonicity(Outcome& o) {
  const nkb::ComplexitySpec spec;
  const auto curve = nkb::complexity_check(spec, nkb::default_threads());
  std::vector<double> eps, acc;
  o.detail << "accuracy:";
  for (const auto& p : curve) {
    eps.push_back(p.epsilon);
    acc.push_back(p.mean_accuracy);
    o.detail << ' ' << std::setprecision(4) << p.mean_accuracy;
    o.require(p.failures == 0, "no failed fits at epsilon " + std::to_string(p.epsilon));
  }
  const double rho = spearman(eps, acc);
  o.detail << " spearman=" << rho;
  o.require(rho <= -0.9, "spearman <= -0.9");
}

void training_frequency(Outcome& o) {
  nkb::WheelConfig w;
  w.delta = 0.5;
  const nkb::WheelEnvironment env(w);
  auto run = [&](std::size_t f) {
    nkb::BanditConfig cfg = kernel_agent(nkb::DistributionKind::NNGP).bandit;
    cfg.train_freq = f;
    nkb::NkBandit agent(cfg, env.context_dim());
    return nkb::run_rollout(env, agent, 2000, 1);
  };
  const auto every = run(1);
  const auto sparse = run(100);
  o.require(!every.error && !sparse.error, "rollouts completed");
  const double time_ratio = sparse.total_time() / every.total_time();
  const double reward_gap = std::abs(sparse.cumulative_reward() - every.cumulative_reward()) / every.cumulative_reward();
  o.detail << "time f=1: " << every.total_time() << "s, f=100: " << sparse.total_time() << "s, ratio=" << time_ratio
           << "; reward f=1: " << every.cumulative_reward() << ", f=100: " << sparse.cumulative_reward()
           << ", rel_gap=" << reward_gap;
  o.require(time_ratio <= 0.5, "time ratio <= 0.5");
  o.require(reward_gap <= 0.15, "reward within 15%");
}

void determinism(Outcome& o) {
  nkb::GridSpec spec;
  spec.epsilons = {0.0, 3.0};
  spec.deltas = {0.5, 0.9};
  nkb::AgentSpec ucb = kernel_agent(nkb::DistributionKind::NTKGP);
  ucb.bandit.policy = nkb::Policy::UCB;
  nkb::AgentSpec tp = kernel_agent(nkb::DistributionKind::RandomizedPrior);
  tp.bandit.process = nkb::ProcessKind::student_t(12.0);
  nkb::AgentSpec lin;
  lin.kind = nkb::AgentKind::LinearTS;
  spec.configs = {kernel_agent(nkb::DistributionKind::NNGP), ucb, tp, lin};
  spec.runs = 3;
  spec.steps = 150;
  spec.master_seed = 42;
  std::string reference;
  for (std::size_t threads : {1, 2, 4}) {
    std::ostringstream csv;
    nkb::write_grid_csv(nkb::grid_sweep(spec, threads), spec, csv);
    if (threads == 1) {
      reference = csv.str();
      o.detail << "rows=" << std::count(reference.begin(), reference.end(), '\n') - 1;
    } else {
      const bool same = csv.str() == reference;
      o.detail << " threads=" << threads << (same ? " identical" : " DIFFERENT");
      o.require(same, "byte-identical at " + std::to_string(threads) + " threads");
    }
  }
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "kernel closed form", kernel_closed_form},
      {2, "Monte Carlo kernel", monte_carlo_kernel},
      {3, "ridge equivalence", ridge_equivalence},
      {4, "predictive table cross-check", table_cross_check},
      {5, "Student-t contract", tp_contract},
      {6, "wheel sanity", wheel_sanity},
      {7, "easy wheel", easy_wheel},
      {8, "exploration ordering", exploration_ordering},
      {9, "complexity monotonicity", complexity_monotonicity},
      {10, "training frequency", training_frequency},
      {11, "determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string id; std::getline(ss, id, ',');) only.insert(std::stoi(id));
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]]\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " -- "
              << o.detail.str() << " [" << std::fixed << std::setprecision(1) << secs << "s]" << std::defaultfloat
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
