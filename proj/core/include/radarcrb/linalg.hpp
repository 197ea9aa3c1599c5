#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace radarcrb {

/// Thrown when a numerically required property fails (factorization
/// breakdown, non-positive-definite covariance, singular information matrix
/// in a context that cannot tolerate it).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kronecker product, row-major block convention: (A kron B) has block (i,j)
/// equal to A(i,j) * B.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
      a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Hermitian square root of a positive semidefinite matrix via eigen
/// decomposition; eigenvalues below clamp * max(|lambda|) are treated as 0,
/// and genuinely negative eigenvalues beyond that tolerance raise
/// NumericalError.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hermitian_sqrt(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, double clamp = 1e-12) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double floor = clamp * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -floor) throw NumericalError("matrix is not positive semidefinite");
    lam(i) = lam(i) > 0.0 ? std::sqrt(lam(i)) : 0.0;
  }
  return es.eigenvectors() * lam.asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Result of inverting a symmetric information matrix that may be singular.
struct PsdInverse {
  Eigen::MatrixXd inverse;          ///< pseudoinverse on the retained subspace
  double condition = 0.0;           ///< ratio of extreme retained eigenvalues
  bool reliable = true;             ///< false when directions were dropped or condition > 1e12
  Eigen::VectorXd null_direction;   ///< eigenvector of the smallest eigenvalue (empty if none dropped)
};

/// Eigenvalue-thresholded pseudoinverse of a real symmetric PSD matrix;
/// eigenvalues below threshold * max eigenvalue are dropped.
PsdInverse psd_pseudo_inverse(const Eigen::MatrixXd& m, double threshold = 1e-12,
                              double condition_warn = 1e12);

}  // namespace radarcrb
