// Cholesky solves of (M + gamma I) with an escalating diagonal jitter.
#pragma once

#include "nkbandit/kernels.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <atomic>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nkb {

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double condition_estimate = 0.0)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}

  /// max/min diagonal ratio of the failing matrix; a cheap lower bound on its condition.
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

inline constexpr std::array<double, 5> kJitterLadder{0.0, 1e-10, 1e-8, 1e-6, 1e-4};

namespace detail {
inline std::uint64_t next_matrix_tag() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

/// Lower Cholesky factor of (M + gamma I + jitter I). Immutable once built.
template <typename Scalar>
class SpdFactorization {
 public:
  SpdFactorization() = default;

  /// Factorizes the symmetric matrix `m` (lower triangle is read), trying the
  /// jitter ladder in order until the factorization succeeds.
  static SpdFactorization factorize(const Matrix<Scalar>& m, Scalar gamma) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spd: matrix must be square");
    SpdFactorization f;
    f.gamma_ = gamma;
    f.tag_ = detail::next_matrix_tag();
    const Eigen::Index n = m.rows();
    if (n == 0) return f;
    for (double jitter : kJitterLadder) {
      Matrix<Scalar> shifted = m;
      shifted.diagonal().array() += gamma + static_cast<Scalar>(jitter);
      Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(shifted);
      if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
        f.factor_ = llt.matrixL();
        f.jitter_ = static_cast<Scalar>(jitter);
        return f;
      }
    }
    const auto d = m.diagonal().cwiseAbs();
    const double cond = d.minCoeff() > 0 ? static_cast<double>(d.maxCoeff() / d.minCoeff()) : 1e300;
    std::ostringstream msg;
    msg << "spd factorization failed for " << n << "x" << n << " matrix (gamma=" << gamma
        << ", max jitter=" << kJitterLadder.back() << ", diag ratio=" << cond << ")";
    throw NumericalError(msg.str(), cond);
  }

  /// Factor of the bordered matrix `m_full`, whose leading block must be the
  /// matrix this factorization was built from. Reuses the existing factor and
  /// keeps the same jitter; falls back to a full factorization when the new
  /// Schur complement is not positive definite.
  SpdFactorization extended(const Matrix<Scalar>& m_full) const {
    const Eigen::Index n = size();
    const Eigen::Index total = m_full.rows();
    if (total < n) throw std::invalid_argument("spd: extended matrix is smaller than the factor");
    if (total == n) return *this;
    if (n == 0) return factorize(m_full, gamma_);
    const Eigen::Index r = total - n;
    Matrix<Scalar> border = m_full.block(0, n, n, r);
    factor_.template triangularView<Eigen::Lower>().solveInPlace(border);
    Matrix<Scalar> schur = m_full.block(n, n, r, r);
    schur.noalias() -= border.transpose() * border;
    schur.diagonal().array() += gamma_ + jitter_;
    Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(schur);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite())
      return factorize(m_full, gamma_);
    SpdFactorization f;
    f.gamma_ = gamma_;
    f.jitter_ = jitter_;
    f.tag_ = detail::next_matrix_tag();
    f.factor_.setZero(total, total);
    f.factor_.topLeftCorner(n, n) = factor_;
    f.factor_.bottomLeftCorner(r, n) = border.transpose();
    f.factor_.bottomRightCorner(r, r) = llt.matrixL();
    return f;
  }

  /// x = (M + (gamma + jitter) I)^{-1} rhs
  template <typename Derived>
  typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
    typename Derived::PlainObject x = rhs;
    if (size() == 0) return x;
    factor_.template triangularView<Eigen::Lower>().solveInPlace(x);
    factor_.template triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
  }

  /// L^{-1} rhs; its squared norm is the quadratic form rhs^T (M + ...)^{-1} rhs.
  template <typename Derived>
  typename Derived::PlainObject half_solve(const Eigen::MatrixBase<Derived>& rhs) const {
    typename Derived::PlainObject x = rhs;
    if (size() == 0) return x;
    factor_.template triangularView<Eigen::Lower>().solveInPlace(x);
    return x;
  }

  /// L L^T, i.e. M + (gamma + jitter) I.
  Matrix<Scalar> reconstruct() const { return factor_ * factor_.transpose(); }

  Eigen::Index size() const { return factor_.rows(); }
  Scalar gamma() const { return gamma_; }
  Scalar jitter_used() const { return jitter_; }
  std::uint64_t matrix_tag() const { return tag_; }
  const Matrix<Scalar>& factor() const { return factor_; }

 private:
  Matrix<Scalar> factor_;
  Scalar gamma_ = 0;
  Scalar jitter_ = 0;
  std::uint64_t tag_ = 0;
};

template <typename Scalar>
struct SpdSolution {
  Matrix<Scalar> x;
  SpdFactorization<Scalar> factorization;
};

/// Solves (m + gamma I + jitter I) x = rhs for one or more right-hand sides.
template <typename Scalar, typename Derived>
SpdSolution<Scalar> spd_solve(const Matrix<Scalar>& m, Scalar gamma,
                              const Eigen::MatrixBase<Derived>& rhs) {
  if (rhs.rows() != m.rows()) throw std::invalid_argument("spd_solve: rhs has the wrong row count");
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-8))
    throw std::invalid_argument("spd_solve: matrix is not symmetric");
  auto f = SpdFactorization<Scalar>::factorize(m, gamma);
  Matrix<Scalar> x = f.solve(rhs);
  return {std::move(x), std::move(f)};
}

}  // namespace nkb
