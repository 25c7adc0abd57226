#include "nkbandit/environments.hpp"
#include "nkbandit/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "nkbandit_env_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

nkb::WheelConfig wheel(double delta, double epsilon = 0.0) {
  nkb::WheelConfig c;
  c.delta = delta;
  c.epsilon = epsilon;
  c.morph_seed = 99;
  return c;
}

}  // namespace

TEST_CASE("labels by radius and quadrant") {
  CHECK(nkb::wheel_label({0.1, 0.1}, 0.5) == 0);
  CHECK(nkb::wheel_label({0.8, 0.3}, 0.5) == 1);
  CHECK(nkb::wheel_label({-0.8, 0.3}, 0.5) == 2);
  CHECK(nkb::wheel_label({-0.8, -0.3}, 0.5) == 3);
  CHECK(nkb::wheel_label({0.8, -0.3}, 0.5) == 4);
  const Eigen::Vector2d on_circle = Eigen::Vector2d(0.6, 0.8) * 0.5;
  CHECK(nkb::wheel_label(on_circle, 0.5) == 0);
}

TEST_CASE("peripheral context in the first quadrant pays 50 on arm 1") {
  const Eigen::Vector2d raw = Eigen::Vector2d(0.9, 0.9).normalized() * 0.95;
  const auto c = wheel(0.5);
  CHECK(nkb::wheel_label(raw, 0.5) == 1);
  const auto means = nkb::wheel_reward_means(raw, c);
  CHECK(means(1) == 50.0);
  CHECK(means(0) == 1.2);
  CHECK(means(2) == 1.0);
  CHECK((means.array() == 50.0).count() == 1);
  const auto inner = nkb::wheel_reward_means(Eigen::Vector2d(0.1, 0.2), c);
  CHECK((inner.array() == 50.0).count() == 0);
  CHECK(inner.maxCoeff() == 1.2);
}

TEST_CASE("wheel config validation") {
  CHECK_THROWS_AS(wheel(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(wheel(1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(wheel(0.5, -1).validate(), std::invalid_argument);
  CHECK_NOTHROW(wheel(0.99, 10).validate());
}

TEST_CASE("samples lie on the unit disk and label fraction matches the area ratio") {
  nkb::Rng rng(3);
  const auto s = nkb::sample_wheel(100000, wheel(0.5), rng);
  std::size_t outer = 0;
  for (const auto& x : s) {
    CHECK(x.raw_context.norm() <= 1.0);
    if (x.label != 0) ++outer;
    CHECK(x.label == nkb::wheel_label(x.raw_context, 0.5));
  }
  CHECK(std::abs(static_cast<double>(outer) / 1e5 - 0.75) < 0.01);
}

TEST_CASE("reward draws match the configured means and deviations") {
  nkb::Rng rng(4);
  const auto s = nkb::sample_wheel(100000, wheel(0.5), rng);
  struct Acc {
    double n = 0, sum = 0, sum2 = 0;
  } big, small, peripheral;
  for (const auto& x : s)
    for (Eigen::Index a = 0; a < 5; ++a) {
      Acc& acc = x.reward_means(a) == 50.0 ? big : (a == 0 ? small : peripheral);
      acc.n += 1;
      acc.sum += x.rewards(a);
      acc.sum2 += x.rewards(a) * x.rewards(a);
    }
  auto check = [](const Acc& a, double mean, double sd) {
    const double m = a.sum / a.n;
    const double s = std::sqrt(a.sum2 / a.n - m * m);
    CHECK(std::abs(m - mean) / mean < 0.01);
    CHECK(std::abs(s - sd) / sd < 0.05);
  };
  check(big, 50.0, 0.01);
  check(small, 1.2, 0.05);
  check(peripheral, 1.0, 0.05);
}

TEST_CASE("morphing") {
  nkb::Rng rng(5);
  const auto s = nkb::sample_wheel(200, wheel(0.5), rng);
  Eigen::MatrixXd raw(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) raw.row(i) = s[static_cast<std::size_t>(i)].raw_context.transpose();

  SUBCASE("epsilon 0 is the identity") { CHECK(nkb::morph(raw, 0.0, 1, 5, 50) == raw); }
  SUBCASE("same seed gives bitwise identical output") {
    CHECK(nkb::morph(raw, 3.0, 7, 5, 50) == nkb::morph(raw, 3.0, 7, 5, 50));
    CHECK(nkb::morph(raw, 3.0, 7, 5, 50) != nkb::morph(raw, 3.0, 8, 5, 50));
  }
  SUBCASE("shape follows the configured network") {
    const nkb::MorphNetwork net(2.0, 1, 3, 17);
    CHECK_FALSE(net.identity());
    CHECK(net.apply(raw).cols() == 2);
    CHECK(nkb::MorphNetwork(0.0, 1, 3, 17).identity());
  }
  SUBCASE("labels do not depend on epsilon") {
    nkb::Rng a(6), b(6);
    const auto clean = nkb::sample_wheel(500, wheel(0.7, 0.0), a);
    const auto warped = nkb::sample_wheel(500, wheel(0.7, 5.0), b);
    for (std::size_t i = 0; i < 500; ++i) {
      CHECK(clean[i].label == warped[i].label);
      CHECK(clean[i].raw_context == warped[i].raw_context);
    }
  }
}

TEST_CASE("strong morphing hurts supervised accuracy") {
  nkb::ComplexitySpec spec;
  spec.epsilons = {0.0, 10.0};
  spec.seeds = 2;
  const auto curve = nkb::complexity_check(spec);
  REQUIRE(curve.size() == 2);
  CHECK(curve[1].mean_accuracy < curve[0].mean_accuracy);
}

TEST_CASE("classification CSV") {
  SUBCASE("labels become a one-hot reward matrix") {
    const auto p = write_temp("three.csv", "f1,f2,label\n0.1,0.2,0\n0.3,0.4,1\n0.5,0.6,0\n");
    const auto d = nkb::load_csv_classification(p, "label");
    CHECK(d.arms() == 2);
    Eigen::MatrixXd expected(3, 2);
    expected << 1, 0, 0, 1, 1, 0;
    CHECK(d.rewards == expected);
    CHECK(d.contexts.cols() == 2);
    CHECK(d.contexts(1, 1) == 0.4);
    const auto by_index = nkb::load_csv_classification(p, "2");
    CHECK(by_index.rewards == expected);
  }
  SUBCASE("a short line is reported by number") {
    const auto p = write_temp("short.csv", "a,b,label\n1,2,0\n1,2,1\n1,2,0\n1,2,1\n1,2,0\n1,2\n1,2,1\n");
    try {
      nkb::load_csv_classification(p, "label");
      FAIL("expected ParseError");
    } catch (const nkb::ParseError& e) {
      CHECK(e.line() == 7);
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }
  SUBCASE("non-numeric fields and unknown columns are rejected") {
    const auto p = write_temp("bad.csv", "a,label\nx,0\n");
    CHECK_THROWS_AS(nkb::load_csv_classification(p, "label"), nkb::ParseError);
    const auto q = write_temp("ok.csv", "a,label\n1,0\n2,1\n");
    CHECK_THROWS(nkb::load_csv_classification(q, "nope"));
    CHECK_THROWS(nkb::load_csv_classification(q / "missing", "label"));
  }
  SUBCASE("shuffling is deterministic per seed") {
    std::string text = "a,label\n";
    for (int i = 0; i < 40; ++i) text += std::to_string(i) + "," + std::to_string(i % 3) + "\n";
    const auto p = write_temp("many.csv", text);
    const auto a = nkb::load_csv_classification(p, "label", 5);
    const auto b = nkb::load_csv_classification(p, "label", 5);
    const auto c = nkb::load_csv_classification(p, "label", 6);
    const auto plain = nkb::load_csv_classification(p, "label");
    CHECK(a.contexts == b.contexts);
    CHECK(a.contexts != c.contexts);
    CHECK(a.contexts != plain.contexts);
    CHECK(a.contexts.sum() == plain.contexts.sum());
  }
}

TEST_CASE("reward-matrix CSVs") {
  const auto ctx = write_temp("ctx.csv", "x1,x2\n1,2\n3,4\n");
  const auto rew = write_temp("rew.csv", "a,b,c\n0.1,0.5,0.2\n0.3,0.1,0.9\n");
  const auto d = nkb::load_csv_reward_matrix(ctx, rew);
  CHECK(d.arms() == 3);
  CHECK(d.size() == 2);
  const auto bad = write_temp("rew5.csv", "a,b\n1,0\n1,0\n1,0\n1,0\n1,0\n");
  const auto ctx4 = write_temp("ctx4.csv", "x\n1\n2\n3\n4\n");
  CHECK_THROWS(nkb::load_csv_reward_matrix(ctx4, bad));
}

TEST_CASE("dataset environment serves rows in order and wraps") {
  nkb::DatasetEnv d;
  d.contexts.resize(3, 1);
  d.contexts << 1, 2, 3;
  d.rewards.resize(3, 2);
  d.rewards << 0, 1, 1, 0, 0.5, 0.5;
  const nkb::DatasetEnvironment env(d);
  nkb::Rng rng(0);
  const auto rounds = env.rounds(5, rng);
  REQUIRE(rounds.size() == 5);
  CHECK(rounds[0].optimal_arm == 1);
  CHECK(rounds[1].optimal_arm == 0);
  CHECK(rounds[2].optimal_arm == 0);
  CHECK(rounds[3].context(0) == 1);
  CHECK_FALSE(env.interior_arm().has_value());
}

TEST_CASE("equal reward columns make every policy equivalent") {
  nkb::DatasetEnv d;
  d.contexts.resize(4, 2);
  d.contexts << 1, 0, 0, 1, 1, 1, 0.5, 0.2;
  d.rewards.resize(4, 3);
  d.rewards << 1, 1, 1, 2, 2, 2, 0.5, 0.5, 0.5, 3, 3, 3;
  const nkb::DatasetEnvironment env(d);
  nkb::UniformAgent uniform(3);
  nkb::LinearAgent linear(3, 2, nkb::LinearPolicy::TS);
  const double a = nkb::run_rollout(env, uniform, 50, 1).cumulative_reward();
  const double b = nkb::run_rollout(env, linear, 50, 2).cumulative_reward();
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("wheel environment tape") {
  const nkb::WheelEnvironment env(wheel(0.5, 2.0));
  CHECK(env.arms() == 5);
  CHECK(env.context_dim() == 2);
  CHECK(env.interior_arm() == std::optional<std::size_t>(0));
  nkb::Rng a(1), b(1);
  const auto x = env.rounds(50, a);
  const auto y = env.rounds(50, b);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(x[i].context == y[i].context);
    CHECK(x[i].rewards == y[i].rewards);
    CHECK(x[i].rewards.size() == 5);
  }
}
