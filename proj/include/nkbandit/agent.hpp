#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace nkb {

using Rng = std::mt19937_64;

/// A contextual bandit policy. The rollout shows it the context, asks for an
/// arm, and then reveals the reward of that arm only.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::size_t select(const Eigen::VectorXd& context, Rng& rng) = 0;
  virtual void observe(const Eigen::VectorXd& context, std::size_t arm, double reward) = 0;
  virtual std::string name() const = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for (master, a, b); each argument passes through its own finalizer
/// round so nearby indices give unrelated streams.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = splitmix64(master);
  z = splitmix64(z ^ splitmix64(a ^ 0x243F6A8885A308D3ULL));
  z = splitmix64(z ^ splitmix64(b ^ 0x13198A2E03707344ULL));
  return z;
}

}  // namespace nkb
