#include "radarcrb/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace radarcrb {

namespace {

using Cplx = std::complex<double>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd axis_nodes(double center, double halfwidth, int count) {
  Eigen::VectorXd nodes(count);
  if (count == 1 || halfwidth == 0.0) {
    nodes.setConstant(center);
    return nodes;
  }
  for (int i = 0; i < count; ++i) {
    nodes(i) = center - halfwidth + (2.0 * halfwidth) * i / (count - 1);
  }
  return nodes;
}

}  // namespace

void SearchSpec::validate() const {
  if (position_halfwidth_m < 0.0 || velocity_halfwidth_mps < 0.0) {
    throw std::invalid_argument("search halfwidths must be nonnegative");
  }
  if (grid_position < 1 || grid_velocity < 1) {
    throw std::invalid_argument("search grid needs at least one node per axis");
  }
  if (refine_starts < 1 || refine_grid < 2) {
    throw std::invalid_argument("refine_starts must be >= 1 and refine_grid >= 2");
  }
  if (refine_max_iterations < 0) {
    throw std::invalid_argument("refine_max_iterations must be nonnegative");
  }
  if (!(refine_tolerance > 0.0)) {
    throw std::invalid_argument("refine_tolerance must be positive");
  }
  if (!(refine_simplex_scale > 0.0)) {
    throw std::invalid_argument("refine_simplex_scale must be positive");
  }
}

LikelihoodEvaluator::LikelihoodEvaluator(const GmskWaveform& waveform, const Scenario& scenario,
                                         const Eigen::MatrixXcd& reflection,
                                         const NoiseFactors& noise,
                                         Eigen::VectorXcd observation,
                                         const SignalPerturbation* perturbation)
    : waveform_(waveform),
      scenario_(scenario),
      reflection_(reflection),
      noise_(noise),
      perturbation_(perturbation),
      observation_(std::move(observation)),
      m_tx_(scenario.num_tx()),
      n_rx_(scenario.num_rx()),
      samples_(scenario.gmsk.samples()),
      ts_(scenario.gmsk.sample_interval_s()),
      wavelength_(scenario.gmsk.wavelength_m()) {
  if (observation_.size() != static_cast<Eigen::Index>(n_rx_) * samples_) {
    throw std::invalid_argument("observation length does not match N*K");
  }
  if (waveform.num_tx() != m_tx_) {
    throw std::invalid_argument("waveform transmitter count does not match scenario");
  }
  if (perturbation_ && (perturbation_->noise.rows() != samples_ ||
                        perturbation_->noise.cols() != m_tx_ * n_rx_)) {
    throw std::invalid_argument("perturbation table has wrong shape");
  }

  qinv_scaled_ = noise.qtilde_inv / noise.sigma_w2;
  logdet_noise_ = noise.log_det();

  rx_gram_.resize(n_rx_, n_rx_);
  for (int i = 0; i < n_rx_; ++i) {
    for (int j = 0; j < n_rx_; ++j) {
      rx_gram_(i, j) =
          observation_.segment(i * samples_, samples_).dot(observation_.segment(j * samples_,
                                                                                samples_));
    }
  }
  Cplx quad(0.0, 0.0);
  for (int i = 0; i < n_rx_; ++i) {
    for (int j = 0; j < n_rx_; ++j) quad += qinv_scaled_(i, j) * rx_gram_(i, j);
  }
  quad_noise_only_ = quad.real();
}

LikelihoodEvaluator::PositionContext LikelihoodEvaluator::position_context(
    const Eigen::Vector2d& position) const {
  PositionContext ctx;
  ctx.position = position;
  const int nm = m_tx_ * n_rx_;
  ctx.delayed.resize(samples_, nm);
  ctx.doppler_coeff.resize(2, nm);

  const auto& layout = scenario_.layout;
  Eigen::VectorXd d_tx(m_tx_), d_rx(n_rx_);
  for (int m = 0; m < m_tx_; ++m) {
    d_tx(m) = (layout.tx.col(m) - position).norm();
    if (d_tx(m) <= kColocationRadiusM) return ctx;  // invalid
  }
  for (int n = 0; n < n_rx_; ++n) {
    d_rx(n) = (layout.rx.col(n) - position).norm();
    if (d_rx(n) <= kColocationRadiusM) return ctx;
  }

  for (int n = 0; n < n_rx_; ++n) {
    for (int m = 0; m < m_tx_; ++m) {
      const int c = m_tx_ * n + m;
      const double tau = (d_tx(m) + d_rx(n)) / kSpeedOfLight;
      const double amp =
          std::sqrt(scenario_.energy(m) * scenario_.path_gain) / (d_tx(m) * d_rx(n));
      for (int k = 1; k <= samples_; ++k) {
        Cplx base = waveform_.sample(m, k * ts_ - tau);
        if (perturbation_) base += perturbation_->noise(k - 1, c);
        ctx.delayed(k - 1, c) = amp * base;
      }
      ctx.doppler_coeff.col(c) =
          ((layout.tx.col(m) - position) / d_tx(m) + (layout.rx.col(n) - position) / d_rx(n)) /
          wavelength_;
    }
  }
  ctx.valid = true;
  return ctx;
}

double LikelihoodEvaluator::log_likelihood_at(const PositionContext& ctx,
                                              const Eigen::Vector2d& velocity) const {
  if (!ctx.valid) return kNegInf;
  const int nm = m_tx_ * n_rx_;

  // Steering columns u_c = delayed_c .* exp(j 2 pi f_c k Ts), grouped per
  // receiver into K x M blocks.
  Eigen::MatrixXcd u(samples_, nm);
  for (int c = 0; c < nm; ++c) {
    const double f = ctx.doppler_coeff.col(c).dot(velocity);
    const double dphi = 2.0 * M_PI * f * ts_;
    const Cplx w(std::cos(dphi), std::sin(dphi));
    Cplx wk = w;
    const Cplx* src = ctx.delayed.col(c).data();
    Cplx* dst = u.col(c).data();
    for (int k = 0; k < samples_; ++k) {
      dst[k] = src[k] * wk;
      wk *= w;
    }
  }

  // G = S^H Q^{-1} S assembled from per-receiver-pair Gram blocks, and
  // t = S^H Q^{-1} r.
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(nm, nm);
  Eigen::VectorXcd t = Eigen::VectorXcd::Zero(nm);
  for (int i = 0; i < n_rx_; ++i) {
    const auto u_i = u.middleCols(i * m_tx_, m_tx_);
    for (int j = 0; j < n_rx_; ++j) {
      const double w = qinv_scaled_(i, j);
      if (w == 0.0) continue;
      const auto u_j = u.middleCols(j * m_tx_, m_tx_);
      g.block(i * m_tx_, j * m_tx_, m_tx_, m_tx_).noalias() = w * (u_i.adjoint() * u_j);
      t.segment(i * m_tx_, m_tx_).noalias() +=
          w * (u_i.adjoint() * observation_.segment(j * samples_, samples_));
    }
  }

  Eigen::MatrixXcd wmat = Eigen::MatrixXcd::Identity(nm, nm) + reflection_ * g;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(wmat);
  double logdet_w = 0.0;
  for (int i = 0; i < nm; ++i) logdet_w += std::log(std::abs(lu.matrixLU()(i, i)));

  const Eigen::VectorXcd x = lu.solve(reflection_ * t);
  const double quad = quad_noise_only_ - t.dot(x).real();
  return -quad - (logdet_noise_ + logdet_w);
}

double LikelihoodEvaluator::operator()(const TargetState& candidate) const {
  const PositionContext ctx = position_context(candidate.position);
  return log_likelihood_at(ctx, candidate.velocity);
}

double LikelihoodEvaluator::velocity_mainlobe_mps() const {
  return waveform_.params().wavelength_m() / (2.0 * waveform_.params().duration_s());
}

double LikelihoodEvaluator::dense_reference(const TargetState& candidate) const {
  try {
    const SteeringSet steering =
        build_steering(waveform_, scenario_, candidate, perturbation_);
    const CovarianceBundle bundle(steering.s, reflection_, noise_);
    return bundle.log_likelihood(observation_);
  } catch (const std::domain_error&) {
    return kNegInf;
  }
}

namespace {

struct Profiled {
  Eigen::Vector2d velocity;
  double ll = kNegInf;
};

/// Maximizes the likelihood over velocity at a fixed position context by a
/// hierarchical zoom seeded at `seed`: scan an n x n square of halfwidth h0,
/// re-center on the best node, and shrink by 3 whenever the best node is
/// interior (or the center itself). Stops once the square halfwidth falls
/// below rel_floor times the box halfwidth. Nodes are clamped into the
/// velocity box; ties keep the earliest node.
Profiled profile_velocity(const LikelihoodEvaluator& evaluator,
                          const LikelihoodEvaluator::PositionContext& ctx,
                          const SearchSpec& search, double rel_floor,
                          const Eigen::Vector2d& seed, double h0) {
  Profiled out{search.velocity_center, kNegInf};
  if (!ctx.valid) return out;
  const double hw = search.velocity_halfwidth_mps;
  const int n = search.grid_velocity;

  const double lo_x = search.velocity_center.x() - hw;
  const double hi_x = search.velocity_center.x() + hw;
  const double lo_y = search.velocity_center.y() - hw;
  const double hi_y = search.velocity_center.y() + hw;
  out.velocity = {std::clamp(seed.x(), lo_x, hi_x), std::clamp(seed.y(), lo_y, hi_y)};
  out.ll = evaluator.log_likelihood_at(ctx, out.velocity);
  if (hw <= 0.0 || n <= 1) return out;

  Eigen::Vector2d center = out.velocity;
  double h = std::min(h0, hw);
  const double floor_h = hw * rel_floor;
  constexpr int kMaxRounds = 80;

  for (int round = 0; round < kMaxRounds && h > floor_h; ++round) {
    double best_ll = kNegInf;
    Eigen::Vector2d best_v = center;
    int best_i = -1, best_j = -1;
    for (int i = 0; i < n; ++i) {
      const double vx = std::clamp(center.x() + h * (2.0 * i / (n - 1) - 1.0), lo_x, hi_x);
      for (int j = 0; j < n; ++j) {
        const double vy = std::clamp(center.y() + h * (2.0 * j / (n - 1) - 1.0), lo_y, hi_y);
        const double ll = evaluator.log_likelihood_at(ctx, {vx, vy});
        if (best_i < 0 || ll > best_ll) {
          best_ll = ll;
          best_v = {vx, vy};
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_ll > out.ll) {
      out.ll = best_ll;
      out.velocity = best_v;
    }
    const bool interior = best_i > 0 && best_i < n - 1 && best_j > 0 && best_j < n - 1;
    const bool stuck = best_v.x() == center.x() && best_v.y() == center.y();
    if (interior || stuck) h /= 3.0;
    center = best_v;
  }
  return out;
}

constexpr double kProfileFloorCoarse = 1e-2;  ///< while ranking coarse position nodes
constexpr double kProfileFloorScan = 1e-3;    ///< inside the local fine grids
constexpr double kProfileFloorRefine = 1e-5;  ///< inside the position refinement
constexpr double kProfileFloorFinal = 1e-7;   ///< final polish at the chosen position

}  // namespace

MlEstimate ml_estimate(const LikelihoodEvaluator& evaluator, const SearchSpec& search) {
  search.validate();
  const Eigen::VectorXd xs = axis_nodes(search.position_center.x(), search.position_halfwidth_m,
                                        search.grid_position);
  const Eigen::VectorXd ys = axis_nodes(search.position_center.y(), search.position_halfwidth_m,
                                        search.grid_position);
  const double cell = search.grid_position > 1
                          ? 2.0 * search.position_halfwidth_m / (search.grid_position - 1)
                          : search.position_halfwidth_m;

  // One-time dense velocity scan. The velocity mainlobe is narrow and flanked
  // by burst-length sidelobes, but its location drifts only a few m/s across
  // the whole position box (the Doppler compensation is overdetermined across
  // paths), so every later zoom is seeded here and never mistakes a sidelobe
  // for the needle.
  Eigen::Vector2d v_seed = search.velocity_center;
  const double v_hw = search.velocity_halfwidth_mps;
  const double v_span = v_hw / 3.0;
  if (v_hw > 0.0 && search.grid_velocity > 1) {
    auto seed_ctx = evaluator.position_context(search.position_center);
    for (int ix = 0; ix < xs.size() && !seed_ctx.valid; ++ix)
      for (int iy = 0; iy < ys.size() && !seed_ctx.valid; ++iy)
        seed_ctx = evaluator.position_context({xs(ix), ys(iy)});
    if (seed_ctx.valid) {
      const double lobe = std::max(evaluator.velocity_mainlobe_mps(), 1e-9);
      const int half = std::max(1, std::min(40, static_cast<int>(std::ceil(2.0 * v_hw / lobe))));
      double best = kNegInf;
      Eigen::Vector2d best_v = v_seed;
      for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
          const Eigen::Vector2d v =
              search.velocity_center + (v_hw / half) * Eigen::Vector2d(i, j);
          const double ll = evaluator.log_likelihood_at(seed_ctx, v);
          if (ll > best) {
            best = ll;
            best_v = v;
          }
        }
      }
      v_seed = profile_velocity(evaluator, seed_ctx, search, kProfileFloorScan, best_v,
                                2.0 * v_hw / half)
                   .velocity;
    }
  }

  struct Node {
    Eigen::Vector2d position;
    Eigen::Vector2d velocity;
    double ll;
  };
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(xs.size()) * static_cast<std::size_t>(ys.size()));
  for (int ix = 0; ix < xs.size(); ++ix) {
    for (int iy = 0; iy < ys.size(); ++iy) {
      const Eigen::Vector2d pos{xs(ix), ys(iy)};
      const auto ctx = evaluator.position_context(pos);
      const Profiled p =
          profile_velocity(evaluator, ctx, search, kProfileFloorCoarse, v_seed, v_span);
      if (std::isfinite(p.ll)) nodes.push_back({pos, p.velocity, p.ll});
    }
  }
  if (nodes.empty()) {
    throw NumericalError("every grid node was invalid (colocated with a station?)");
  }

  // Rank order with spatial deduplication: a candidate inside another
  // selected candidate's neighborhood would zoom into the same basin.
  std::vector<std::size_t> starts;
  std::vector<bool> taken(nodes.size(), false);
  const double dedupe_radius = 1.5 * cell;
  for (int s = 0; s < search.refine_starts; ++s) {
    std::size_t pick = nodes.size();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (taken[i]) continue;
      bool shadowed = false;
      for (const std::size_t j : starts) {
        if ((nodes[i].position - nodes[j].position).norm() < dedupe_radius) {
          shadowed = true;
          break;
        }
      }
      if (shadowed) {
        taken[i] = true;
        continue;
      }
      if (pick == nodes.size() || nodes[i].ll > nodes[pick].ll) pick = i;
    }
    if (pick == nodes.size()) break;
    taken[pick] = true;
    starts.push_back(pick);
  }

  double best_ll = nodes[starts.front()].ll;
  Eigen::Vector2d best_pos = nodes[starts.front()].position;
  Eigen::Vector2d best_vel = nodes[starts.front()].velocity;

  MlEstimate out;
  out.coarse_estimate = TargetState{best_pos, best_vel};
  out.coarse_log_likelihood = best_ll;

  const double lo_x = search.position_center.x() - search.position_halfwidth_m;
  const double hi_x = search.position_center.x() + search.position_halfwidth_m;
  const double lo_y = search.position_center.y() - search.position_halfwidth_m;
  const double hi_y = search.position_center.y() + search.position_halfwidth_m;

  const auto clamp_pos = [&](Eigen::Vector2d p) {
    p.x() = std::clamp(p.x(), lo_x, hi_x);
    p.y() = std::clamp(p.y(), lo_y, hi_y);
    return p;
  };

  // Local fine grid spanning one coarse cell each side of every start.
  if (cell > 0.0) {
    for (const std::size_t s : starts) {
      for (int ix = 0; ix < search.refine_grid; ++ix) {
        const double frac_x = 2.0 * ix / (search.refine_grid - 1) - 1.0;
        for (int iy = 0; iy < search.refine_grid; ++iy) {
          const double frac_y = 2.0 * iy / (search.refine_grid - 1) - 1.0;
          const Eigen::Vector2d pos =
              clamp_pos(nodes[s].position + cell * Eigen::Vector2d(frac_x, frac_y));
          const auto ctx = evaluator.position_context(pos);
          const Profiled p =
              profile_velocity(evaluator, ctx, search, kProfileFloorScan, v_seed, v_span);
          if (p.ll > best_ll) {
            best_ll = p.ll;
            best_pos = pos;
            best_vel = p.velocity;
          }
        }
      }
    }
  }

  // Negated profiled likelihood; refreshes the running best on every call.
  const auto cost = [&](const Eigen::Vector2d& p) {
    const auto ctx = evaluator.position_context(p);
    const Profiled prof =
        profile_velocity(evaluator, ctx, search, kProfileFloorRefine, v_seed, v_span);
    if (prof.ll > best_ll) {
      best_ll = prof.ll;
      best_pos = p;
      best_vel = prof.velocity;
    }
    return -prof.ll;
  };

  int iterations = 0;
  bool converged = search.position_halfwidth_m <= 0.0 || search.refine_max_iterations == 0;

  if (search.position_halfwidth_m > 0.0 && search.refine_max_iterations > 0) {
    const double fine_cell = 2.0 * cell / (search.refine_grid - 1);
    const double step = search.refine_simplex_scale * std::max(fine_cell, 1e-9);

    std::vector<Eigen::Vector2d> simplex(3, best_pos);
    simplex[1].x() += (simplex[1].x() + step <= hi_x) ? step : -step;
    simplex[2].y() += (simplex[2].y() + step <= hi_y) ? step : -step;
    std::vector<double> f(3);
    for (int i = 0; i < 3; ++i) f[i] = cost(clamp_pos(simplex[i]));

    for (; iterations < search.refine_max_iterations; ++iterations) {
      std::vector<int> order = {0, 1, 2};
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
      {
        std::vector<Eigen::Vector2d> s2 = {simplex[order[0]], simplex[order[1]],
                                           simplex[order[2]]};
        std::vector<double> f2 = {f[order[0]], f[order[1]], f[order[2]]};
        simplex.swap(s2);
        f.swap(f2);
      }

      const double spread = std::abs(f[2] - f[0]);
      if (std::isfinite(f[0]) && spread <= search.refine_tolerance * (std::abs(f[0]) + 1e-30)) {
        converged = true;
        break;
      }

      const Eigen::Vector2d centroid = 0.5 * (simplex[0] + simplex[1]);
      const auto moved = [&](double coeff) {
        return clamp_pos(centroid + coeff * (centroid - simplex[2]));
      };

      const Eigen::Vector2d xr = moved(1.0);
      const double fr = cost(xr);
      if (fr < f[0]) {
        const Eigen::Vector2d xe = moved(2.0);
        const double fe = cost(xe);
        if (fe < fr) {
          simplex[2] = xe;
          f[2] = fe;
        } else {
          simplex[2] = xr;
          f[2] = fr;
        }
      } else if (fr < f[1]) {
        simplex[2] = xr;
        f[2] = fr;
      } else {
        const bool outside = fr < f[2];
        const Eigen::Vector2d xc = moved(outside ? 0.5 : -0.5);
        const double fc = cost(xc);
        if (fc < (outside ? fr : f[2])) {
          simplex[2] = xc;
          f[2] = fc;
        } else {
          for (int i = 1; i < 3; ++i) {
            simplex[i] = clamp_pos(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
            f[i] = cost(simplex[i]);
          }
        }
      }
    }
  }

  {
    const auto ctx = evaluator.position_context(best_pos);
    const Profiled polish =
        profile_velocity(evaluator, ctx, search, kProfileFloorFinal, best_vel, v_span);
    if (polish.ll > best_ll) {
      best_ll = polish.ll;
      best_vel = polish.velocity;
    }
  }

  out.estimate = TargetState{best_pos, best_vel};
  out.log_likelihood = best_ll;
  out.refine_iterations = iterations;
  out.refine_converged = converged;
  return out;
}

double log_likelihood(const GmskWaveform& waveform, const Scenario& scenario,
                      const Eigen::MatrixXcd& reflection, const NoiseFactors& noise,
                      const Eigen::VectorXcd& observation, const TargetState& candidate,
                      const SignalPerturbation* perturbation) {
  const LikelihoodEvaluator eval(waveform, scenario, reflection, noise, observation, perturbation);
  return eval(candidate);
}

}  // namespace radarcrb
