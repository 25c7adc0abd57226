// Predictive moments of neural-kernel Gaussian processes and the
// Student's-t process obtained by placing a conjugate prior on the noise.
#pragma once

#include "nkbandit/kernels.hpp"
#include "nkbandit/spd.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nkb {

/// The four predictive distributions over (NNGP kernel K, NTK Theta):
///   NNGP            mu = K*X (K + gI)^-1 y,      s2 = K** - K*X (K + gI)^-1 KX*
///   DeepEnsemble    mu = T*X T^-1 y,             s2 = K** + T*X T^-1 K T^-1 TX* - 2 T*X T^-1 KX*
///   RandomizedPrior like DeepEnsemble with T replaced by (T + gI)
///   NTKGP           mu = T*X (T + gI)^-1 y,      s2 = T** - T*X (T + gI)^-1 TX*
enum class DistributionKind { NNGP, DeepEnsemble, RandomizedPrior, NTKGP };

inline std::string_view to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::NNGP: return "nngp";
    case DistributionKind::DeepEnsemble: return "deep-ensemble";
    case DistributionKind::RandomizedPrior: return "randomized-prior";
    case DistributionKind::NTKGP: return "ntkgp";
  }
  return "?";
}

inline DistributionKind parse_distribution(std::string_view name) {
  if (name == "nngp") return DistributionKind::NNGP;
  if (name == "deep-ensemble") return DistributionKind::DeepEnsemble;
  if (name == "randomized-prior") return DistributionKind::RandomizedPrior;
  if (name == "ntkgp") return DistributionKind::NTKGP;
  throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

/// Gaussian process, or Student's-t process with nu > 2 degrees of freedom.
struct ProcessKind {
  enum class Family { Gaussian, StudentT };
  Family family = Family::Gaussian;
  double nu = 12.0;

  static ProcessKind gaussian() { return {}; }
  static ProcessKind student_t(double nu) {
    if (!(nu > 2.0)) throw std::invalid_argument("StudentT process requires nu > 2");
    return {Family::StudentT, nu};
  }
  bool is_student_t() const { return family == Family::StudentT; }
  friend bool operator==(const ProcessKind&, const ProcessKind&) = default;
};

template <typename Scalar>
struct PredictiveMoments {
  Scalar mean = 0;
  Scalar variance = 0;
  std::optional<Scalar> dof;  // present only for Student-t
  bool clamped = false;       // variance came out negative and was set to 0
};

/// The factor the Student-t predictive applies to the Gaussian posterior variance:
/// (nu + beta - 2)/(nu + n - 2) * (nu - 2)/nu, beta = y^T (K + gI)^-1 y.
template <typename Scalar>
Scalar tp_variance_scale(Scalar nu, Scalar beta, Eigen::Index n) {
  const Scalar nn = static_cast<Scalar>(n);
  return (nu + beta - Scalar(2)) / (nu + nn - Scalar(2)) * ((nu - Scalar(2)) / nu);
}

/// Cached posterior for one training set: the factorization of the governing
/// training matrix and its solve against the targets. Cheap to query per test
/// point (triangular solves only).
template <typename Scalar>
class PosteriorPredictor {
 public:
  PosteriorPredictor() = default;

  PosteriorPredictor(DistributionKind kind, std::shared_ptr<const GramPair<Scalar>> train,
                     Vector<Scalar> y, Scalar gamma)
      : kind_(kind), gamma_(gamma) {
    check_gamma(kind, gamma);
    if (!train) throw std::invalid_argument("PosteriorPredictor: null training Gram");
    if (!train->square()) throw std::invalid_argument("PosteriorPredictor: training Gram must be square");
    if (y.size() != train->rows())
      throw std::invalid_argument("PosteriorPredictor: target length does not match the Gram");
    if (needs_nngp_train(kind)) nngp_train_ = std::shared_ptr<const Matrix<Scalar>>(train, &train->nngp);
    factorization_ = SpdFactorization<Scalar>::factorize(governing(*train), effective_gamma());
    set_targets(std::move(y));
  }

  /// Builds from a single kernel matrix; valid for NNGP and NTKGP, whose
  /// moments involve one kernel only.
  static PosteriorPredictor from_kernel(DistributionKind kind, const Matrix<Scalar>& train,
                                        Vector<Scalar> y, Scalar gamma) {
    if (needs_nngp_train(kind))
      throw std::invalid_argument("from_kernel: this distribution needs both kernels");
    if (y.size() != train.rows())
      throw std::invalid_argument("PosteriorPredictor: target length does not match the Gram");
    check_gamma(kind, gamma);
    PosteriorPredictor p;
    p.kind_ = kind;
    p.gamma_ = gamma;
    p.factorization_ = SpdFactorization<Scalar>::factorize(train, gamma);
    p.set_targets(std::move(y));
    return p;
  }

  /// Posterior for a training set that grew by appending rows to the one this
  /// predictor was built on. Reuses the existing factor.
  PosteriorPredictor extended(std::shared_ptr<const GramPair<Scalar>> grown, Vector<Scalar> y) const {
    if (!grown || y.size() != grown->rows())
      throw std::invalid_argument("PosteriorPredictor::extended: target length does not match the Gram");
    PosteriorPredictor p;
    p.kind_ = kind_;
    p.gamma_ = gamma_;
    if (needs_nngp_train(kind_)) p.nngp_train_ = std::shared_ptr<const Matrix<Scalar>>(grown, &grown->nngp);
    p.factorization_ = factorization_.extended(governing(*grown));
    p.set_targets(std::move(y));
    return p;
  }

  /// Gaussian moments at one test point given its kernel values against the
  /// training inputs and its own prior (diagonal) kernel values.
  PredictiveMoments<Scalar> gaussian(const KernelPair<Vector<Scalar>>& cross,
                                     const KernelPair<Scalar>& test_diag) const {
    PredictiveMoments<Scalar> m;
    const Eigen::Index n = size();
    if (n == 0) {
      m.mean = 0;
      m.variance = kind_ == DistributionKind::NTKGP ? test_diag.ntk : test_diag.nngp;
      return m;
    }
    if (cross.nngp.size() != n || cross.ntk.size() != n)
      throw std::invalid_argument("PosteriorPredictor: cross-kernel length does not match training set");
    switch (kind_) {
      case DistributionKind::NNGP: {
        m.mean = cross.nngp.dot(alpha_);
        const Vector<Scalar> v = factorization_.half_solve(cross.nngp);
        m.variance = test_diag.nngp - v.squaredNorm();
        break;
      }
      case DistributionKind::NTKGP: {
        m.mean = cross.ntk.dot(alpha_);
        const Vector<Scalar> v = factorization_.half_solve(cross.ntk);
        m.variance = test_diag.ntk - v.squaredNorm();
        break;
      }
      case DistributionKind::DeepEnsemble:
      case DistributionKind::RandomizedPrior: {
        m.mean = cross.ntk.dot(alpha_);
        const Vector<Scalar> w = factorization_.solve(cross.ntk);
        const Vector<Scalar> kw = nngp_train_->template selfadjointView<Eigen::Lower>() * w;
        m.variance = test_diag.nngp + w.dot(kw) - Scalar(2) * w.dot(cross.nngp);
        break;
      }
    }
    if (!(m.variance >= 0)) {
      m.variance = 0;
      m.clamped = true;
    }
    return m;
  }

  PredictiveMoments<Scalar> predict(const KernelPair<Vector<Scalar>>& cross,
                                    const KernelPair<Scalar>& test_diag,
                                    const ProcessKind& process) const {
    PredictiveMoments<Scalar> m = gaussian(cross, test_diag);
    if (process.is_student_t()) {
      const Scalar nu = static_cast<Scalar>(process.nu);
      m.variance *= tp_variance_scale(nu, beta_, size());
      m.dof = nu + static_cast<Scalar>(size());
    }
    return m;
  }

  DistributionKind kind() const { return kind_; }
  Scalar gamma() const { return gamma_; }
  /// y^T (M + gI)^-1 y for the governing training matrix M.
  Scalar data_fit() const { return beta_; }
  Eigen::Index size() const { return alpha_.size(); }
  const SpdFactorization<Scalar>& factorization() const { return factorization_; }

  static bool needs_nngp_train(DistributionKind kind) {
    return kind == DistributionKind::DeepEnsemble || kind == DistributionKind::RandomizedPrior;
  }

 private:
  static void check_gamma(DistributionKind kind, Scalar gamma) {
    if (kind != DistributionKind::DeepEnsemble && !(gamma > 0))
      throw std::invalid_argument("PosteriorPredictor: gamma must be > 0");
  }

  // The deep-ensemble row inverts the unregularized NTK Gram.
  Scalar effective_gamma() const { return kind_ == DistributionKind::DeepEnsemble ? Scalar(0) : gamma_; }

  const Matrix<Scalar>& governing(const GramPair<Scalar>& g) const {
    return kind_ == DistributionKind::NNGP ? g.nngp : g.ntk;
  }

  void set_targets(Vector<Scalar> y) {
    alpha_ = factorization_.solve(y);
    beta_ = y.dot(alpha_);
  }

  DistributionKind kind_ = DistributionKind::NNGP;
  Scalar gamma_ = 0;
  SpdFactorization<Scalar> factorization_;
  std::shared_ptr<const Matrix<Scalar>> nngp_train_;
  Vector<Scalar> alpha_;
  Scalar beta_ = 0;
};

/// One-shot Gaussian moments (factorizes on every call).
template <typename Scalar>
PredictiveMoments<Scalar> gp_moments(DistributionKind kind, const GramPair<Scalar>& train_grams,
                                     const KernelPair<Vector<Scalar>>& cross,
                                     const KernelPair<Scalar>& test_diag, const Vector<Scalar>& y,
                                     Scalar gamma) {
  auto shared = std::make_shared<const GramPair<Scalar>>(train_grams);
  return PosteriorPredictor<Scalar>(kind, std::move(shared), y, gamma).gaussian(cross, test_diag);
}

template <typename Scalar>
PredictiveMoments<Scalar> gp_moments(DistributionKind kind, const GramPair<Scalar>& train_grams,
                                     const GramPair<Scalar>& cross, const KernelPair<Scalar>& test_diag,
                                     const Vector<Scalar>& y, Scalar gamma) {
  if (cross.rows() != 1) throw std::invalid_argument("gp_moments: cross Gram must have one row");
  KernelPair<Vector<Scalar>> c{cross.nngp.row(0).transpose(), cross.ntk.row(0).transpose()};
  return gp_moments(kind, train_grams, c, test_diag, y, gamma);
}

/// Sign convention inside the Student-t inverse. `Regularized` uses (K + gI);
/// `Literal` uses (K - gI), which can be indefinite.
enum class TpSign { Regularized, Literal };

template <typename Scalar>
PredictiveMoments<Scalar> tp_moments(const Matrix<Scalar>& train_nngp, const Vector<Scalar>& cross,
                                     Scalar test_diag, const Vector<Scalar>& y, Scalar gamma,
                                     Scalar nu, TpSign sign = TpSign::Regularized) {
  if (!(nu > 2)) throw std::invalid_argument("tp_moments: nu must be > 2");
  const Eigen::Index n = train_nngp.rows();
  if (y.size() != n || cross.size() != n)
    throw std::invalid_argument("tp_moments: inconsistent training sizes");
  if (sign == TpSign::Regularized) {
    auto p = PosteriorPredictor<Scalar>::from_kernel(DistributionKind::NNGP, train_nngp, y, gamma);
    return p.predict({cross, cross}, {test_diag, test_diag}, ProcessKind::student_t(static_cast<double>(nu)));
  }
  PredictiveMoments<Scalar> m;
  m.dof = nu + static_cast<Scalar>(n);
  Scalar beta = 0;
  Scalar gp_var = test_diag;
  if (n > 0) {
    Matrix<Scalar> shifted = train_nngp;
    shifted.diagonal().array() -= gamma;
    Eigen::LDLT<Matrix<Scalar>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw NumericalError("tp_moments: (K - gI) is singular");
    const Vector<Scalar> a = ldlt.solve(y);
    m.mean = cross.dot(a);
    beta = y.dot(a);
    gp_var = test_diag - cross.dot(ldlt.solve(cross));
  }
  m.variance = tp_variance_scale(nu, beta, n) * gp_var;
  if (!(m.variance >= 0)) {
    m.variance = 0;
    m.clamped = true;
  }
  return m;
}

}  // namespace nkb
