#pragma once

#include <Eigen/Dense>

namespace radarcrb {

/// Exact speed of light used throughout (m/s).
inline constexpr double kSpeedOfLight = 2.99792458e8;

/// Any station-target distance at or below this radius (m) is treated as a
/// colocation and rejected: delays/Dopplers and 1/d amplitude factors blow up.
inline constexpr double kColocationRadiusM = 1e-6;

/// Positions of the M transmitters and N receivers, columns are (x, y) in m.
struct StationLayout {
  Eigen::Matrix2Xd tx;
  Eigen::Matrix2Xd rx;

  int num_tx() const { return static_cast<int>(tx.cols()); }
  int num_rx() const { return static_cast<int>(rx.cols()); }
  int num_paths() const { return num_tx() * num_rx(); }
};

/// Uniform ring of M transmitters and N receivers of the given radius around
/// a reference point; transmitter m sits at angle 2*pi*m/M (m = 0..M-1),
/// receiver n at 2*pi*n/N.
StationLayout ring_layout(const Eigen::Vector2d& reference, double radius_m, int num_tx,
                          int num_rx);

/// Target position (m) and velocity (m/s); the unknown vector is
/// theta = [x, y, vx, vy]^T.
struct TargetState {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;

  Eigen::Vector4d stacked() const {
    return (Eigen::Vector4d() << position, velocity).finished();
  }
  static TargetState from_stacked(const Eigen::Vector4d& v) {
    return {v.head<2>(), v.tail<2>()};
  }
};

/// Per-path delays and Dopplers plus per-station target ranges.
///
/// Path index convention throughout the toolkit: path c = M*n + m couples
/// transmitter m (0-based) with receiver n (0-based), i.e. the transmitter
/// index varies fastest. Stacked order: [delay (NM), doppler (NM),
/// range_tx (M), range_rx (N)], total dimension 2NM + M + N.
struct IntermediateParams {
  Eigen::VectorXd delay_s;     ///< tau_c, size NM
  Eigen::VectorXd doppler_hz;  ///< f_c, size NM
  Eigen::VectorXd range_tx_m;  ///< d_t,m, size M
  Eigen::VectorXd range_rx_m;  ///< d_r,n, size N

  int num_paths() const { return static_cast<int>(delay_s.size()); }
  int dim() const {
    return static_cast<int>(2 * delay_s.size() + range_tx_m.size() + range_rx_m.size());
  }
  Eigen::VectorXd stacked() const;
  static IntermediateParams from_stacked(const Eigen::VectorXd& v, int num_tx, int num_rx);
};

/// Blocks of the 4 x (2NM+M+N) Jacobian d(vartheta)/d(theta), evaluated at a
/// target state. Naming follows the roles of the entries:
///   delay_pos   = d tau / d (x,y)      (2 x NM)
///   doppler_pos = d f / d (x,y)        (2 x NM)
///   doppler_vel = d f / d (vx,vy)      (2 x NM)   [independent of velocity]
///   range_tx_pos = d d_t / d (x,y)     (2 x M)
///   range_rx_pos = d d_r / d (x,y)     (2 x N)
/// Ranges and delays do not depend on velocity, so those blocks are zero.
struct JacobianBlocks {
  Eigen::Matrix2Xd delay_pos;
  Eigen::Matrix2Xd doppler_pos;
  Eigen::Matrix2Xd doppler_vel;
  Eigen::Matrix2Xd range_tx_pos;
  Eigen::Matrix2Xd range_rx_pos;

  /// Full Jacobian with rows (x, y, vx, vy) and columns in stacked
  /// IntermediateParams order.
  Eigen::MatrixXd assembled() const;
};

/// Bistatic delays tau_c = (d_t,m + d_r,n)/c, Dopplers
/// f_c = v.(p_t,m - p)/(lambda d_t,m) + v.(p_r,n - p)/(lambda d_r,n)
/// (positive for a target approaching a station), and target ranges.
/// Throws std::domain_error if the target is within kColocationRadiusM of a
/// station, std::invalid_argument for a non-positive wavelength or an empty
/// layout.
IntermediateParams intermediate_params(const StationLayout& layout, const TargetState& target,
                                       double wavelength_m);

/// Analytic Jacobian of the intermediate parameters with respect to theta.
/// Same error contract as intermediate_params.
JacobianBlocks jacobian(const StationLayout& layout, const TargetState& target,
                        double wavelength_m);

}  // namespace radarcrb
