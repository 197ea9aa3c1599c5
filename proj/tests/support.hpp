#pragma once

// Scene builders shared by the unit and acceptance tests.

#include <radarcrb/rng.hpp>
#include <radarcrb/signal_model.hpp>
#include <radarcrb/waveform.hpp>

namespace radarcrb::test {

// Small deterministic scene, cheap enough for dense-oracle work.
inline Scenario small_scenario(int num_tx = 2, int num_rx = 2, int num_bits = 4,
                               int oversampling = 4) {
  Scenario sc;
  sc.layout = ring_layout({0.0, 0.0}, 5000.0, num_tx, num_rx);
  sc.target.position = {400.0, 250.0};
  sc.target.velocity = {30.0, -20.0};
  sc.gmsk.num_bits = num_bits;
  sc.gmsk.oversampling = oversampling;
  sc.scnr_db = 10.0;
  return sc;
}

// Randomized scene with M, N in {1,2,3} and K <= 32: varied geometry, powers,
// correlation models, SCNR. Drives the oracle comparisons across the lattice
// of structural cases (single path, rank-1 blocks, correlated everything).
inline Scenario random_scenario(RngStream& rng) {
  Scenario sc;
  const int m = 1 + static_cast<int>(rng.uniform_index(3));
  const int n = 1 + static_cast<int>(rng.uniform_index(3));
  const double radius = rng.uniform(3000.0, 9000.0);
  sc.layout = ring_layout({rng.uniform(-1000.0, 1000.0), rng.uniform(-1000.0, 1000.0)}, radius,
                          m, n);
  sc.target.position = {rng.uniform(-0.4, 0.4) * radius, rng.uniform(-0.4, 0.4) * radius};
  sc.target.velocity = {rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};

  sc.gmsk.num_bits = 4 + static_cast<int>(rng.uniform_index(5));
  sc.gmsk.oversampling = 2 + 2 * static_cast<int>(rng.uniform_index(2));
  sc.gmsk.bt_product = rng.uniform() < 0.5 ? 0.3 : 0.5;
  sc.gmsk.freq_offset_hz = rng.uniform() < 0.5 ? 300.0 : 1500.0;

  sc.tx_energy = Eigen::VectorXd::NullaryExpr(m, [&](Eigen::Index) {
    return rng.uniform(0.5, 2.0);
  });
  sc.path_gain = rng.uniform(0.5, 2.0);
  sc.reflection.sigma2 = Eigen::VectorXd::NullaryExpr(m * n, [&](Eigen::Index) {
    return rng.uniform(0.5, 2.0);
  });
  const double corr = rng.uniform();
  if (corr < 0.4) {
    sc.reflection.angle_decay = rng.uniform(0.2, 2.0);
  }
  if (corr >= 0.2 && corr < 0.6) {
    sc.noise.distance_decay = rng.uniform(5e-5, 5e-4);
  }
  sc.scnr_db = rng.uniform(0.0, 20.0);
  sc.validate();
  return sc;
}

inline GmskWaveform waveform_for(const Scenario& sc, RngStream& rng) {
  return GmskWaveform(sc.gmsk, random_bits(rng, sc.num_tx(), sc.gmsk.num_bits));
}

}  // namespace radarcrb::test
