#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Dense>

#include "rgd/errors.hpp"

namespace rgd {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Numerical thresholds shared by the small dense linear algebra. Defaults
/// are the module constants; callers may pass their own.
struct Tolerances {
  double symmetry = 1e-12;       // relative, max |A - A^tr| / max |A|
  double eigen_floor = 1e-12;    // relative to the largest eigenvalue
  double sqrt_residual = 1e-10;  // relative, |sqrt^2 - A| / max |A|
  double max_condition = 1e12;   // for sigma a sigma^tr
  double loewner = 1e-12;        // absolute slack on smallest eigenvalues
};

namespace detail {

template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? typename Derived::Scalar(0) : m.cwiseAbs().maxCoeff();
}

template <typename Derived>
typename Derived::Scalar smallest_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Symmetric positive-definite matrix with its symmetric square root.
///
/// The square root is computed once, at construction, from a symmetric
/// eigendecomposition; instances are immutable afterwards.
template <typename Scalar>
class SPDMatrix {
 public:
  using MatrixType = MatrixX<Scalar>;
  using VectorType = VectorX<Scalar>;

  explicit SPDMatrix(MatrixType entries, const Tolerances& tol = {}) : entries_(std::move(entries)) {
    require(entries_.rows() == entries_.cols() && entries_.rows() > 0, ErrorCode::NotSPD,
            "matrix must be square and non-empty");
    const Scalar scale = std::max(detail::max_abs(entries_), std::numeric_limits<Scalar>::min());
    const Scalar asym = detail::max_abs(entries_ - entries_.transpose());
    require(asym <= Scalar(tol.symmetry) * scale, ErrorCode::NotSPD, "matrix is not symmetric");
    entries_ = (entries_ + entries_.transpose()) / Scalar(2);

    Eigen::SelfAdjointEigenSolver<MatrixType> es(entries_);
    require(es.info() == Eigen::Success, ErrorCode::NotSPD, "eigendecomposition failed");
    eigenvalues_ = es.eigenvalues();
    const Scalar largest = eigenvalues_.maxCoeff();
    const Scalar smallest = eigenvalues_.minCoeff();
    require(largest > Scalar(0) && smallest > Scalar(tol.eigen_floor) * largest, ErrorCode::NotSPD,
            "smallest eigenvalue below floor");

    const MatrixType& v = es.eigenvectors();
    sqrt_ = v * eigenvalues_.cwiseSqrt().asDiagonal() * v.transpose();
    sqrt_ = (sqrt_ + sqrt_.transpose()) / Scalar(2);
    inv_sqrt_ = v * eigenvalues_.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
    inv_sqrt_ = (inv_sqrt_ + inv_sqrt_.transpose()) / Scalar(2);

    require(detail::max_abs(sqrt_ * sqrt_ - entries_) <= Scalar(tol.sqrt_residual) * scale,
            ErrorCode::NotSPD, "square root residual too large");
  }

  static SPDMatrix identity(Eigen::Index n) { return SPDMatrix(MatrixType::Identity(n, n)); }

  static SPDMatrix diagonal(const VectorType& d) { return SPDMatrix(MatrixType(d.asDiagonal())); }

  const MatrixType& matrix() const noexcept { return entries_; }
  const MatrixType& sqrt() const noexcept { return sqrt_; }
  const MatrixType& inverse_sqrt() const noexcept { return inv_sqrt_; }
  const VectorType& eigenvalues() const noexcept { return eigenvalues_; }
  Eigen::Index size() const noexcept { return entries_.rows(); }

  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

 private:
  MatrixType entries_;
  MatrixType sqrt_;
  MatrixType inv_sqrt_;
  VectorType eigenvalues_;
};

using SPDMatrixd = SPDMatrix<double>;

/// Symmetric square root of `a`, itself returned as an SPD matrix.
template <typename Scalar>
SPDMatrix<Scalar> spd_sqrt(const SPDMatrix<Scalar>& a, const Tolerances& tol = {}) {
  return SPDMatrix<Scalar>(a.sqrt(), tol);
}

/// Loewner order test lo <= hi, i.e. hi - lo positive semidefinite up to `slack`.
template <typename Scalar>
bool loewner_leq(const MatrixX<Scalar>& lo, const MatrixX<Scalar>& hi, Scalar slack = Scalar(1e-12)) {
  return detail::smallest_eigenvalue(hi - lo) >= -slack;
}

template <typename Scalar>
bool loewner_between(const SPDMatrix<Scalar>& a, const SPDMatrix<Scalar>& lo, const SPDMatrix<Scalar>& hi,
                     Scalar slack = Scalar(1e-12)) {
  return loewner_leq<Scalar>(lo.matrix(), a.matrix(), slack) && loewner_leq<Scalar>(a.matrix(), hi.matrix(), slack);
}

/// Orthogonal projections of R^n onto Im((sigma a^{1/2})^tr) and its
/// complement Ker(sigma a^{1/2}).
template <typename Scalar>
class Projector {
 public:
  using MatrixType = MatrixX<Scalar>;
  using VectorType = VectorX<Scalar>;

  Projector(MatrixType sigma, SPDMatrix<Scalar> a, const Tolerances& tol = {})
      : sigma_(std::move(sigma)), a_(std::move(a)) {
    require(sigma_.cols() == a_.size(), ErrorCode::InvalidArgument, "sigma columns must match dim(a)");
    require(sigma_.rows() >= 1 && sigma_.rows() <= sigma_.cols(), ErrorCode::InvalidArgument,
            "need 1 <= d <= n for sigma (d x n)");
    loading_ = sigma_ * a_.sqrt();
    MatrixType gram = sigma_ * a_.matrix() * sigma_.transpose();
    gram = (gram + gram.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<MatrixType> es(gram, Eigen::EigenvaluesOnly);
    const Scalar lo = es.eigenvalues().minCoeff();
    const Scalar hi = es.eigenvalues().maxCoeff();
    require(lo > Scalar(0) && hi / lo < Scalar(tol.max_condition), ErrorCode::DegenerateVolatility,
            "sigma a sigma^tr is numerically singular");

    p_im_ = loading_.transpose() * gram.ldlt().solve(loading_);
    p_im_ = (p_im_ + p_im_.transpose()) / Scalar(2);
    p_ker_ = MatrixType::Identity(dim(), dim()) - p_im_;
  }

  const MatrixType& sigma() const noexcept { return sigma_; }
  const SPDMatrix<Scalar>& a() const noexcept { return a_; }
  /// sigma a^{1/2}, the d x n volatility loading.
  const MatrixType& loading() const noexcept { return loading_; }
  const MatrixType& p_im() const noexcept { return p_im_; }
  const MatrixType& p_ker() const noexcept { return p_ker_; }
  Eigen::Index dim() const noexcept { return sigma_.cols(); }
  Eigen::Index traded() const noexcept { return sigma_.rows(); }

  template <typename Derived>
  VectorType im(const Eigen::MatrixBase<Derived>& z) const { return p_im_ * z; }
  template <typename Derived>
  VectorType ker(const Eigen::MatrixBase<Derived>& z) const { return p_ker_ * z; }

 private:
  MatrixType sigma_;
  SPDMatrix<Scalar> a_;
  MatrixType loading_;
  MatrixType p_im_;
  MatrixType p_ker_;
};

using Projectord = Projector<double>;

template <typename Scalar>
Projector<Scalar> make_projector(const MatrixX<Scalar>& sigma, const SPDMatrix<Scalar>& a,
                                 const Tolerances& tol = {}) {
  return Projector<Scalar>(sigma, a, tol);
}

}  // namespace rgd
