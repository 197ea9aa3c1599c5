#include <doctest.h>

#include <cmath>
#include <radarcrb/geometry.hpp>
#include <radarcrb/rng.hpp>

#include "support.hpp"

using namespace radarcrb;

TEST_SUITE("geometry") {

TEST_CASE("ring layout places stations at the stated angles") {
  const Eigen::Vector2d ref(100.0, -50.0);
  const StationLayout layout = ring_layout(ref, 2000.0, 2, 3);
  REQUIRE(layout.num_tx() == 2);
  REQUIRE(layout.num_rx() == 3);
  CHECK((layout.tx.col(0) - (ref + Eigen::Vector2d(2000.0, 0.0))).norm() < 1e-9);
  CHECK((layout.tx.col(1) - (ref + Eigen::Vector2d(-2000.0, 0.0))).norm() < 1e-9);
  for (int n = 0; n < 3; ++n) {
    const double ang = 2.0 * M_PI * n / 3.0;
    const Eigen::Vector2d expect = ref + 2000.0 * Eigen::Vector2d(std::cos(ang), std::sin(ang));
    CHECK((layout.rx.col(n) - expect).norm() < 1e-9);
  }
}

TEST_CASE("delay, doppler, and ranges match hand values on a right-angle scene") {
  StationLayout layout;
  layout.tx.resize(2, 1);
  layout.tx.col(0) = Eigen::Vector2d(1000.0, 0.0);
  layout.rx.resize(2, 1);
  layout.rx.col(0) = Eigen::Vector2d(0.0, 2000.0);
  const TargetState target{{0.0, 0.0}, {10.0, 0.0}};
  const double lambda = 0.3;

  const IntermediateParams p = intermediate_params(layout, target, lambda);
  REQUIRE(p.num_paths() == 1);
  CHECK(p.range_tx_m(0) == doctest::Approx(1000.0));
  CHECK(p.range_rx_m(0) == doctest::Approx(2000.0));
  CHECK(p.delay_s(0) == doctest::Approx(3000.0 / kSpeedOfLight));
  // Only the transmitter leg sees the motion; approaching means positive.
  CHECK(p.doppler_hz(0) == doctest::Approx(10.0 / lambda));
}

TEST_CASE("path index couples transmitter fastest") {
  const Scenario sc = test::small_scenario(3, 2);
  const IntermediateParams p =
      intermediate_params(sc.layout, sc.target, sc.gmsk.wavelength_m());
  for (int n = 0; n < 2; ++n) {
    for (int m = 0; m < 3; ++m) {
      const double d_t = (sc.layout.tx.col(m) - sc.target.position).norm();
      const double d_r = (sc.layout.rx.col(n) - sc.target.position).norm();
      CHECK(p.delay_s(3 * n + m) == doctest::Approx((d_t + d_r) / kSpeedOfLight));
    }
  }
}

TEST_CASE("stacking round-trips") {
  const Scenario sc = test::small_scenario(2, 3);
  const IntermediateParams p =
      intermediate_params(sc.layout, sc.target, sc.gmsk.wavelength_m());
  const IntermediateParams back = IntermediateParams::from_stacked(p.stacked(), 2, 3);
  CHECK((back.delay_s - p.delay_s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.doppler_hz - p.doppler_hz).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.range_tx_m - p.range_tx_m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.range_rx_m - p.range_rx_m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian zero blocks: delays and ranges ignore velocity") {
  const Scenario sc = test::small_scenario(2, 3);
  const Eigen::MatrixXd j = jacobian(sc.layout, sc.target, sc.gmsk.wavelength_m()).assembled();
  const int nm = sc.num_paths();
  // Rows 2..3 are velocity; delay and range columns there must vanish.
  CHECK(j.block(2, 0, 2, nm).cwiseAbs().maxCoeff() == 0.0);
  CHECK(j.block(2, 2 * nm, 2, sc.num_tx() + sc.num_rx()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian matches central differences across random scenes") {
  RngStream rng(314, 11);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const Scenario sc = test::random_scenario(rng);
    const double lambda = sc.gmsk.wavelength_m();
    const Eigen::MatrixXd analytic = jacobian(sc.layout, sc.target, lambda).assembled();
    const double steps[4] = {1e-2, 1e-2, 1e-3, 1e-3};
    for (int i = 0; i < 4; ++i) {
      Eigen::Vector4d theta = sc.target.stacked();
      theta(i) += steps[i];
      const Eigen::VectorXd hi =
          intermediate_params(sc.layout, TargetState::from_stacked(theta), lambda).stacked();
      theta(i) -= 2.0 * steps[i];
      const Eigen::VectorXd lo =
          intermediate_params(sc.layout, TargetState::from_stacked(theta), lambda).stacked();
      const Eigen::VectorXd fd = (hi - lo) / (2.0 * steps[i]);
      const double scale = analytic.row(i).cwiseAbs().maxCoeff();
      if (scale <= 0.0) continue;
      worst = std::max(worst,
                       (analytic.row(i).transpose() - fd).cwiseAbs().maxCoeff() / scale);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("colocated target is rejected") {
  StationLayout layout;
  layout.tx.resize(2, 1);
  layout.tx.col(0) = Eigen::Vector2d(0.0, 0.0);
  layout.rx.resize(2, 1);
  layout.rx.col(0) = Eigen::Vector2d(1000.0, 0.0);
  const TargetState on_station{{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(intermediate_params(layout, on_station, 0.3), std::domain_error);
  CHECK_THROWS_AS(jacobian(layout, on_station, 0.3), std::domain_error);
}

TEST_CASE("empty layout and bad wavelength are rejected") {
  StationLayout empty;
  empty.tx.resize(2, 0);
  empty.rx.resize(2, 0);
  const TargetState t{{1.0, 2.0}, {0.0, 0.0}};
  CHECK_THROWS_AS(intermediate_params(empty, t, 0.3), std::invalid_argument);
  const StationLayout ok = ring_layout({0.0, 0.0}, 1000.0, 1, 1);
  CHECK_THROWS_AS(intermediate_params(ok, t, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(intermediate_params(ok, t, -1.0), std::invalid_argument);
}

}  // TEST_SUITE
