// Closed-form NNGP and NTK kernels of fully-connected ReLU networks in the
// infinite-width limit (NTK parameterization).
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nkb {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { ReLU };

/// Architecture of the infinite network: `depth` hidden ReLU layers between an
/// affine input layer and an affine readout.
struct KernelConfig {
  int depth = 2;
  double weight_variance = 2.0;
  double bias_variance = 0.01;
  Activation activation = Activation::ReLU;

  void validate() const {
    if (depth < 0) throw std::invalid_argument("KernelConfig: depth must be >= 0");
    if (!(weight_variance > 0.0))
      throw std::invalid_argument("KernelConfig: weight_variance must be > 0");
    if (!(bias_variance >= 0.0))
      throw std::invalid_argument("KernelConfig: bias_variance must be >= 0");
  }

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// NNGP value and NTK value for the same pair of inputs. `T` is a scalar for a
/// single entry or a vector/matrix for batched evaluations.
template <typename T>
struct KernelPair {
  T nngp;
  T ntk;
};

namespace detail {

// Diagonal entries at or below this are treated as a zero-variance signal.
inline constexpr double kZeroVariance = 1e-12;

template <typename Scalar>
struct LayerOutput {
  Scalar kernel;
  Scalar derivative;
};

// One ReLU layer followed by the affine map of the next layer, given the
// previous layer's cross term and the two diagonal terms.
template <typename Scalar>
LayerOutput<Scalar> relu_layer(Scalar cross, Scalar diag_a, Scalar diag_b,
                               const KernelConfig& config) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar sw2 = static_cast<Scalar>(config.weight_variance);
  const Scalar sb2 = static_cast<Scalar>(config.bias_variance);
  if (diag_a <= Scalar(kZeroVariance) || diag_b <= Scalar(kZeroVariance)) {
    // theta := pi/2, the continuous limit of the arc-cosine expressions.
    return {sb2, sw2 / Scalar(4)};
  }
  const Scalar norm = std::sqrt(diag_a * diag_b);
  const Scalar rho = std::clamp(cross / norm, Scalar(-1), Scalar(1));
  const Scalar theta = std::acos(rho);
  const Scalar kernel =
      sb2 + sw2 / (Scalar(2) * pi) * norm * (std::sin(theta) + (pi - theta) * std::cos(theta));
  const Scalar derivative = sw2 * (pi - theta) / (Scalar(2) * pi);
  return {kernel, derivative};
}

template <typename Scalar>
Scalar input_layer(Scalar dot, Eigen::Index dim, const KernelConfig& config) {
  return static_cast<Scalar>(config.bias_variance) +
         static_cast<Scalar>(config.weight_variance) * (dot / static_cast<Scalar>(dim));
}

}  // namespace detail

/// Per-layer self-covariances K^(l)(x, x) for l = 0..depth. Caching these lets
/// a Gram entry cost one cross recursion.
template <typename Scalar, typename Derived>
Vector<Scalar> diagonal_chain(const Eigen::MatrixBase<Derived>& x, const KernelConfig& config) {
  Vector<Scalar> chain(config.depth + 1);
  Scalar k = detail::input_layer<Scalar>(x.dot(x), x.size(), config);
  chain(0) = k;
  for (int l = 1; l <= config.depth; ++l) {
    k = detail::relu_layer<Scalar>(k, k, k, config).kernel;
    chain(l) = k;
  }
  return chain;
}

/// Cross recursion for two inputs whose diagonal chains are already known.
template <typename Scalar, typename D1, typename D2, typename C1, typename C2>
KernelPair<Scalar> kernel_from_chains(const Eigen::MatrixBase<D1>& x, const Eigen::MatrixBase<D2>& y,
                                      const Eigen::MatrixBase<C1>& chain_x,
                                      const Eigen::MatrixBase<C2>& chain_y,
                                      const KernelConfig& config) {
  Scalar nngp = detail::input_layer<Scalar>(x.dot(y), x.size(), config);
  Scalar ntk = nngp;
  for (int l = 1; l <= config.depth; ++l) {
    const auto layer = detail::relu_layer<Scalar>(nngp, chain_x(l - 1), chain_y(l - 1), config);
    ntk = layer.kernel + ntk * layer.derivative;
    nngp = layer.kernel;
  }
  return {nngp, ntk};
}

template <typename Scalar = double, typename D1, typename D2>
KernelPair<Scalar> kernel_entry(const Eigen::MatrixBase<D1>& x, const Eigen::MatrixBase<D2>& x_prime,
                                const KernelConfig& config) {
  if (x.size() != x_prime.size())
    throw std::invalid_argument("kernel_entry: input dimensions differ (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(x_prime.size()) + ")");
  if (x.size() == 0) throw std::invalid_argument("kernel_entry: inputs must have dimension >= 1");
  const Vector<Scalar> cx = diagonal_chain<Scalar>(x, config);
  const Vector<Scalar> cy = diagonal_chain<Scalar>(x_prime, config);
  return kernel_from_chains<Scalar>(x, x_prime, cx, cy, config);
}

/// Kernel matrices between two input sets stored one point per row. The input
/// sets and their diagonal chains travel with the matrices so the Gram can be
/// extended and queried later without recomputation.
template <typename Scalar>
struct GramPair {
  Matrix<Scalar> nngp;
  Matrix<Scalar> ntk;
  Matrix<Scalar> row_inputs;
  Matrix<Scalar> col_inputs;
  Matrix<Scalar> row_chains;  // n x (depth + 1)
  Matrix<Scalar> col_chains;  // m x (depth + 1)
  KernelConfig config;

  Eigen::Index rows() const { return nngp.rows(); }
  Eigen::Index cols() const { return nngp.cols(); }
  bool square() const { return nngp.rows() == nngp.cols(); }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> chains_of(const Matrix<Scalar>& inputs, const KernelConfig& config) {
  Matrix<Scalar> chains(inputs.rows(), config.depth + 1);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    chains.row(i) = diagonal_chain<Scalar>(inputs.row(i), config).transpose();
  return chains;
}

template <typename Scalar>
void check_dims(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols())
    throw std::invalid_argument("gram: input sets have different dimensions (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
}

}  // namespace detail

/// Symmetric Gram of one input set; only the upper triangle is evaluated.
template <typename Scalar>
GramPair<Scalar> gram(const Matrix<Scalar>& inputs, const KernelConfig& config) {
  config.validate();
  const Eigen::Index n = inputs.rows();
  GramPair<Scalar> g;
  g.config = config;
  g.row_inputs = inputs;
  g.col_inputs = inputs;
  g.row_chains = detail::chains_of(inputs, config);
  g.col_chains = g.row_chains;
  g.nngp.resize(n, n);
  g.ntk.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const auto k = kernel_from_chains<Scalar>(inputs.row(i), inputs.row(j), g.row_chains.row(i),
                                                g.row_chains.row(j), config);
      g.nngp(i, j) = g.nngp(j, i) = k.nngp;
      g.ntk(i, j) = g.ntk(j, i) = k.ntk;
    }
  }
  return g;
}

template <typename Scalar>
GramPair<Scalar> gram(const Matrix<Scalar>& rows, const Matrix<Scalar>& cols,
                      const KernelConfig& config) {
  if (&rows == &cols || (rows.rows() == cols.rows() && rows.cols() == cols.cols() && rows == cols))
    return gram(rows, config);
  config.validate();
  detail::check_dims(rows, cols);
  GramPair<Scalar> g;
  g.config = config;
  g.row_inputs = rows;
  g.col_inputs = cols;
  g.row_chains = detail::chains_of(rows, config);
  g.col_chains = detail::chains_of(cols, config);
  g.nngp.resize(rows.rows(), cols.rows());
  g.ntk.resize(rows.rows(), cols.rows());
  for (Eigen::Index j = 0; j < cols.rows(); ++j) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const auto k = kernel_from_chains<Scalar>(rows.row(i), cols.row(j), g.row_chains.row(i),
                                                g.col_chains.row(j), config);
      g.nngp(i, j) = k.nngp;
      g.ntk(i, j) = k.ntk;
    }
  }
  return g;
}

/// Kernel values between one query point and every row input of a Gram.
template <typename Scalar, typename Derived>
KernelPair<Vector<Scalar>> cross_kernels(const Eigen::MatrixBase<Derived>& x,
                                         const GramPair<Scalar>& train) {
  const Eigen::Index n = train.row_inputs.rows();
  KernelPair<Vector<Scalar>> out{Vector<Scalar>(n), Vector<Scalar>(n)};
  if (n == 0) return out;
  if (x.size() != train.row_inputs.cols())
    throw std::invalid_argument("cross_kernels: query dimension does not match training inputs");
  const Vector<Scalar> chain = diagonal_chain<Scalar>(x, train.config);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = kernel_from_chains<Scalar>(x, train.row_inputs.row(i), chain,
                                              train.row_chains.row(i), train.config);
    out.nngp(i) = k.nngp;
    out.ntk(i) = k.ntk;
  }
  return out;
}

/// Grows a square Gram by `new_inputs`, evaluating only the new rows and
/// columns. The result matches a from-scratch `gram` over the concatenation.
template <typename Scalar>
GramPair<Scalar> gram_extend(const GramPair<Scalar>& cache, const Matrix<Scalar>& new_inputs,
                             const KernelConfig& config) {
  if (!(cache.config == config))
    throw std::invalid_argument("gram_extend: cache was built with a different KernelConfig");
  if (!cache.square()) throw std::invalid_argument("gram_extend: cache must be square");
  const Eigen::Index n = cache.rows();
  const Eigen::Index r = new_inputs.rows();
  if (r == 0) return cache;
  if (n == 0) return gram(new_inputs, config);
  detail::check_dims(cache.row_inputs, new_inputs);

  GramPair<Scalar> g;
  g.config = config;
  g.row_inputs.resize(n + r, new_inputs.cols());
  g.row_inputs << cache.row_inputs, new_inputs;
  g.col_inputs = g.row_inputs;
  g.row_chains.resize(n + r, config.depth + 1);
  g.row_chains << cache.row_chains, detail::chains_of(new_inputs, config);
  g.col_chains = g.row_chains;

  g.nngp.resize(n + r, n + r);
  g.ntk.resize(n + r, n + r);
  g.nngp.topLeftCorner(n, n) = cache.nngp;
  g.ntk.topLeftCorner(n, n) = cache.ntk;
  for (Eigen::Index j = n; j < n + r; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const auto k = kernel_from_chains<Scalar>(g.row_inputs.row(i), g.row_inputs.row(j),
                                                g.row_chains.row(i), g.row_chains.row(j), config);
      g.nngp(i, j) = g.nngp(j, i) = k.nngp;
      g.ntk(i, j) = g.ntk(j, i) = k.ntk;
    }
  }
  return g;
}

}  // namespace nkb
