#include "radarcrb/linalg.hpp"

#include <cmath>
#include <limits>

namespace radarcrb {

PsdInverse psd_pseudo_inverse(const Eigen::MatrixXd& m, double threshold, double condition_warn) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::Index n = lam.size();

  PsdInverse out;
  const double lam_max = lam(n - 1);
  if (!(lam_max > 0.0)) {
    out.inverse = Eigen::MatrixXd::Zero(n, n);
    out.condition = std::numeric_limits<double>::infinity();
    out.reliable = false;
    out.null_direction = v.col(0);
    return out;
  }
  const double cut = threshold * lam_max;
  Eigen::VectorXd inv_lam(n);
  double lam_min_kept = lam_max;
  int dropped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) > cut) {
      inv_lam(i) = 1.0 / lam(i);
      lam_min_kept = std::min(lam_min_kept, lam(i));
    } else {
      inv_lam(i) = 0.0;
      ++dropped;
    }
  }
  out.inverse = v * inv_lam.asDiagonal() * v.transpose();
  out.condition = lam_max / lam_min_kept;
  out.reliable = dropped == 0 && out.condition <= condition_warn;
  if (dropped > 0) out.null_direction = v.col(0);
  return out;
}

}  // namespace radarcrb
