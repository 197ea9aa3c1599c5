#include "radarcrb/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace radarcrb {

namespace {

void check_inputs(const StationLayout& layout, double wavelength_m) {
  if (layout.num_tx() < 1 || layout.num_rx() < 1) {
    throw std::invalid_argument("station layout needs at least one transmitter and one receiver");
  }
  if (!(wavelength_m > 0.0) || !std::isfinite(wavelength_m)) {
    throw std::invalid_argument("wavelength must be positive and finite");
  }
}

double checked_range(const Eigen::Vector2d& station, const Eigen::Vector2d& target,
                     const char* kind, int index) {
  const double d = (station - target).norm();
  if (d <= kColocationRadiusM) {
    throw std::domain_error(std::string(kind) + " " + std::to_string(index) +
                            " is colocated with the target (range " + std::to_string(d) + " m)");
  }
  return d;
}

}  // namespace

StationLayout ring_layout(const Eigen::Vector2d& reference, double radius_m, int num_tx,
                          int num_rx) {
  if (num_tx < 1 || num_rx < 1) {
    throw std::invalid_argument("ring layout needs at least one transmitter and one receiver");
  }
  if (!(radius_m > 0.0)) {
    throw std::invalid_argument("ring radius must be positive");
  }
  StationLayout layout;
  layout.tx.resize(2, num_tx);
  layout.rx.resize(2, num_rx);
  for (int m = 0; m < num_tx; ++m) {
    const double phi = 2.0 * M_PI * m / num_tx;
    layout.tx.col(m) = reference + radius_m * Eigen::Vector2d(std::cos(phi), std::sin(phi));
  }
  for (int n = 0; n < num_rx; ++n) {
    const double phi = 2.0 * M_PI * n / num_rx;
    layout.rx.col(n) = reference + radius_m * Eigen::Vector2d(std::cos(phi), std::sin(phi));
  }
  return layout;
}

Eigen::VectorXd IntermediateParams::stacked() const {
  Eigen::VectorXd v(dim());
  const int nm = num_paths();
  v.head(nm) = delay_s;
  v.segment(nm, nm) = doppler_hz;
  v.segment(2 * nm, range_tx_m.size()) = range_tx_m;
  v.tail(range_rx_m.size()) = range_rx_m;
  return v;
}

IntermediateParams IntermediateParams::from_stacked(const Eigen::VectorXd& v, int num_tx,
                                                    int num_rx) {
  const int nm = num_tx * num_rx;
  if (v.size() != 2 * nm + num_tx + num_rx) {
    throw std::invalid_argument("stacked parameter vector has wrong size");
  }
  IntermediateParams p;
  p.delay_s = v.head(nm);
  p.doppler_hz = v.segment(nm, nm);
  p.range_tx_m = v.segment(2 * nm, num_tx);
  p.range_rx_m = v.tail(num_rx);
  return p;
}

IntermediateParams intermediate_params(const StationLayout& layout, const TargetState& target,
                                       double wavelength_m) {
  check_inputs(layout, wavelength_m);
  const int m_tx = layout.num_tx();
  const int n_rx = layout.num_rx();
  const Eigen::Vector2d p = target.position;
  const Eigen::Vector2d v = target.velocity;

  IntermediateParams out;
  out.range_tx_m.resize(m_tx);
  out.range_rx_m.resize(n_rx);
  out.delay_s.resize(m_tx * n_rx);
  out.doppler_hz.resize(m_tx * n_rx);

  // Per-station ranges and radial rates v.(p_s - p)/d.
  Eigen::VectorXd rate_tx(m_tx), rate_rx(n_rx);
  for (int m = 0; m < m_tx; ++m) {
    const double d = checked_range(layout.tx.col(m), p, "transmitter", m);
    out.range_tx_m(m) = d;
    rate_tx(m) = v.dot(layout.tx.col(m) - p) / d;
  }
  for (int n = 0; n < n_rx; ++n) {
    const double d = checked_range(layout.rx.col(n), p, "receiver", n);
    out.range_rx_m(n) = d;
    rate_rx(n) = v.dot(layout.rx.col(n) - p) / d;
  }

  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) {
      const int c = m_tx * n + m;
      out.delay_s(c) = (out.range_tx_m(m) + out.range_rx_m(n)) / kSpeedOfLight;
      out.doppler_hz(c) = (rate_tx(m) + rate_rx(n)) / wavelength_m;
    }
  }
  return out;
}

JacobianBlocks jacobian(const StationLayout& layout, const TargetState& target,
                        double wavelength_m) {
  check_inputs(layout, wavelength_m);
  const int m_tx = layout.num_tx();
  const int n_rx = layout.num_rx();
  const int nm = m_tx * n_rx;
  const Eigen::Vector2d p = target.position;
  const Eigen::Vector2d v = target.velocity;
  const double lam = wavelength_m;

  JacobianBlocks jb;
  jb.delay_pos.resize(2, nm);
  jb.doppler_pos.resize(2, nm);
  jb.doppler_vel.resize(2, nm);
  jb.range_tx_pos.resize(2, m_tx);
  jb.range_rx_pos.resize(2, n_rx);

  // Per-station pieces. For a station at s with range d:
  //   d d/d(x,y)          = (p - s)/d
  //   d f_station/d(x,y)  = -v/(lambda d) + (s - p) * v.(s - p) / (lambda d^3)
  //   d f_station/d(vx,vy) = (s - p)/(lambda d)
  Eigen::Matrix2Xd tx_fpos(2, m_tx), tx_fvel(2, m_tx);
  Eigen::Matrix2Xd rx_fpos(2, n_rx), rx_fvel(2, n_rx);
  for (int m = 0; m < m_tx; ++m) {
    const double d = checked_range(layout.tx.col(m), p, "transmitter", m);
    const Eigen::Vector2d to_station = layout.tx.col(m) - p;
    jb.range_tx_pos.col(m) = -to_station / d;
    tx_fpos.col(m) = -v / (lam * d) + to_station * (v.dot(to_station) / (lam * d * d * d));
    tx_fvel.col(m) = to_station / (lam * d);
  }
  for (int n = 0; n < n_rx; ++n) {
    const double d = checked_range(layout.rx.col(n), p, "receiver", n);
    const Eigen::Vector2d to_station = layout.rx.col(n) - p;
    jb.range_rx_pos.col(n) = -to_station / d;
    rx_fpos.col(n) = -v / (lam * d) + to_station * (v.dot(to_station) / (lam * d * d * d));
    rx_fvel.col(n) = to_station / (lam * d);
  }

  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) {
      const int c = m_tx * n + m;
      jb.delay_pos.col(c) = (jb.range_tx_pos.col(m) + jb.range_rx_pos.col(n)) / kSpeedOfLight;
      jb.doppler_pos.col(c) = tx_fpos.col(m) + rx_fpos.col(n);
      jb.doppler_vel.col(c) = tx_fvel.col(m) + rx_fvel.col(n);
    }
  }
  return jb;
}

Eigen::MatrixXd JacobianBlocks::assembled() const {
  const int nm = static_cast<int>(delay_pos.cols());
  const int m_tx = static_cast<int>(range_tx_pos.cols());
  const int n_rx = static_cast<int>(range_rx_pos.cols());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, 2 * nm + m_tx + n_rx);
  t.block(0, 0, 2, nm) = delay_pos;
  t.block(0, nm, 2, nm) = doppler_pos;
  t.block(2, nm, 2, nm) = doppler_vel;
  t.block(0, 2 * nm, 2, m_tx) = range_tx_pos;
  t.block(0, 2 * nm + m_tx, 2, n_rx) = range_rx_pos;
  return t;
}

}  // namespace radarcrb
