#include "radarcrb/fim_crb.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "radarcrb/format.hpp"

namespace radarcrb {

namespace {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

constexpr int kTraceOracleMaxDim = 512;

std::array<const Mat*, 4> derivative_sets(const SteeringSet& st) {
  return {&st.s_delay, &st.s_doppler, &st.s_range_tx, &st.s_range_rx};
}

// Path index c = M*n + m. Folding sums path-level kernels into per-station
// range parameters: over receivers for d_t (fixed m), over transmitters for
// d_r (fixed n).
Eigen::MatrixXd fold_cols_tx(const Eigen::MatrixXd& phi, int m_tx, int n_rx) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(phi.rows(), m_tx);
  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) out.col(m) += phi.col(m_tx * n + m);
  }
  return out;
}

Eigen::MatrixXd fold_cols_rx(const Eigen::MatrixXd& phi, int m_tx, int n_rx) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(phi.rows(), n_rx);
  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) out.col(n) += phi.col(m_tx * n + m);
  }
  return out;
}

Eigen::MatrixXd fold_rows_tx(const Eigen::MatrixXd& phi, int m_tx, int n_rx) {
  return fold_cols_tx(phi.transpose(), m_tx, n_rx).transpose();
}

Eigen::MatrixXd fold_rows_rx(const Eigen::MatrixXd& phi, int m_tx, int n_rx) {
  return fold_cols_rx(phi.transpose(), m_tx, n_rx).transpose();
}

/// Dense analytic dC/d(vartheta_i) matrices in stacked parameter order.
std::vector<Mat> dense_derivatives(const SteeringSet& st, const Eigen::MatrixXcd& reflection) {
  const int m_tx = st.num_tx, n_rx = st.num_rx, nm = st.num_paths();
  const auto xs = derivative_sets(st);
  const Mat sz = st.s * reflection;  // column c = S z_c

  std::vector<Mat> out;
  out.reserve(2 * nm + m_tx + n_rx);
  auto rank_one = [&](int c, const Mat& x) {
    return Mat(x.col(c) * sz.col(c).adjoint() + sz.col(c) * x.col(c).adjoint());
  };
  for (int c = 0; c < nm; ++c) out.push_back(rank_one(c, *xs[0]));
  for (int c = 0; c < nm; ++c) out.push_back(rank_one(c, *xs[1]));
  for (int m = 0; m < m_tx; ++m) {
    Mat d = Mat::Zero(st.dim(), st.dim());
    for (int n = 0; n < n_rx; ++n) d += rank_one(m_tx * n + m, *xs[2]);
    out.push_back(std::move(d));
  }
  for (int n = 0; n < n_rx; ++n) {
    Mat d = Mat::Zero(st.dim(), st.dim());
    for (int m = 0; m < m_tx; ++m) d += rank_one(m_tx * n + m, *xs[3]);
    out.push_back(std::move(d));
  }
  return out;
}

FimIntermediate trace_fim_from_derivatives(const CovarianceBundle& cov, std::vector<Mat> derivs,
                                           int m_tx, int n_rx) {
  const int p = static_cast<int>(derivs.size());
  for (auto& d : derivs) d = cov.solve(d);  // A_i = C^{-1} dC_i

  FimIntermediate fim;
  fim.num_tx = m_tx;
  fim.num_rx = n_rx;
  fim.j.resize(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) {
      const double v = derivs[i].cwiseProduct(derivs[j].transpose()).sum().real();
      fim.j(i, j) = v;
      fim.j(j, i) = v;
    }
  }
  return fim;
}

Eigen::VectorXd group_fd_steps(const SteeringSet& reference, double ts, const FdSteps& steps) {
  const int nm = reference.num_paths();
  Eigen::VectorXd h(2 * nm + reference.num_tx + reference.num_rx);
  h.head(nm).setConstant(steps.delay_rel_sample * ts);
  h.segment(nm, nm).setConstant(steps.doppler_hz);
  h.tail(reference.num_tx + reference.num_rx).setConstant(steps.range_m);
  return h;
}

}  // namespace

int FimIntermediate::group_offset(ParamGroup g) const {
  const int nm = num_tx * num_rx;
  switch (g) {
    case ParamGroup::Delay: return 0;
    case ParamGroup::Doppler: return nm;
    case ParamGroup::RangeTx: return 2 * nm;
    case ParamGroup::RangeRx: return 2 * nm + num_tx;
  }
  return 0;
}

int FimIntermediate::group_size(ParamGroup g) const {
  switch (g) {
    case ParamGroup::Delay:
    case ParamGroup::Doppler: return num_tx * num_rx;
    case ParamGroup::RangeTx: return num_tx;
    case ParamGroup::RangeRx: return num_rx;
  }
  return 0;
}

Eigen::MatrixXd FimIntermediate::block(ParamGroup row, ParamGroup col) const {
  return j.block(group_offset(row), group_offset(col), group_size(row), group_size(col));
}

FimIntermediate fim_intermediate_closed_form(const SteeringSet& steering,
                                             const Eigen::MatrixXcd& reflection,
                                             const CovarianceBundle& cov) {
  const int m_tx = steering.num_tx, n_rx = steering.num_rx, nm = steering.num_paths();
  const auto xs = derivative_sets(steering);

  const Mat cinv_s = cov.solve(steering.s);
  const Mat g_s = cinv_s.adjoint() * steering.s;      // S^H C^{-1} S
  const Mat t = reflection * g_s * reflection;        // R S^H C^{-1} S R
  std::array<Mat, 4> rg;                              // R S^H C^{-1} X_a
  std::array<Mat, 4> cinv_x;                          // C^{-1} X_a
  for (int a = 0; a < 4; ++a) {
    rg[a] = reflection * (cinv_s.adjoint() * (*xs[a]));
    cinv_x[a] = cov.solve(*xs[a]);
  }

  // Path-level kernel for a parameter-group pair (a, b):
  //   Phi_ab(c, d) = 2 Re{ [R S^H C^{-1} X_b](c,d) [R S^H C^{-1} X_a](d,c)
  //                        + [X_a^H C^{-1} X_b](c,d) [R S^H C^{-1} S R](d,c) }.
  // Every FIM block is Phi itself (delay/Doppler) or a receiver/transmitter
  // fold of it (range parameters).
  auto phi = [&](int a, int b) {
    const Mat a_ab = cinv_x[a].adjoint() * (*xs[b]);
    return Eigen::MatrixXd(
        2.0 * (rg[b].cwiseProduct(rg[a].transpose()) + a_ab.cwiseProduct(t.transpose())).real());
  };

  const int p = 2 * nm + m_tx + n_rx;
  const int o_tau = 0, o_f = nm, o_dt = 2 * nm, o_dr = 2 * nm + m_tx;

  FimIntermediate fim;
  fim.num_tx = m_tx;
  fim.num_rx = n_rx;
  fim.j = Eigen::MatrixXd::Zero(p, p);
  fim.j.block(o_tau, o_tau, nm, nm) = phi(0, 0);
  fim.j.block(o_tau, o_f, nm, nm) = phi(0, 1);
  fim.j.block(o_tau, o_dt, nm, m_tx) = fold_cols_tx(phi(0, 2), m_tx, n_rx);
  fim.j.block(o_tau, o_dr, nm, n_rx) = fold_cols_rx(phi(0, 3), m_tx, n_rx);
  fim.j.block(o_f, o_f, nm, nm) = phi(1, 1);
  fim.j.block(o_f, o_dt, nm, m_tx) = fold_cols_tx(phi(1, 2), m_tx, n_rx);
  fim.j.block(o_f, o_dr, nm, n_rx) = fold_cols_rx(phi(1, 3), m_tx, n_rx);
  fim.j.block(o_dt, o_dt, m_tx, m_tx) = fold_rows_tx(fold_cols_tx(phi(2, 2), m_tx, n_rx), m_tx, n_rx);
  fim.j.block(o_dt, o_dr, m_tx, n_rx) = fold_rows_tx(fold_cols_rx(phi(2, 3), m_tx, n_rx), m_tx, n_rx);
  fim.j.block(o_dr, o_dr, n_rx, n_rx) = fold_rows_rx(fold_cols_rx(phi(3, 3), m_tx, n_rx), m_tx, n_rx);

  const Eigen::MatrixXd sym = fim.j.selfadjointView<Eigen::Upper>();
  fim.j = sym;
  return fim;
}

FimIntermediate fim_intermediate_trace_oracle(const SteeringSet& steering,
                                              const Eigen::MatrixXcd& reflection,
                                              const CovarianceBundle& cov) {
  if (steering.dim() > kTraceOracleMaxDim) {
    throw NumericalError("trace oracle holds P dense NK x NK matrices; reduce K or station counts");
  }
  return trace_fim_from_derivatives(cov, dense_derivatives(steering, reflection), steering.num_tx,
                                    steering.num_rx);
}

FimIntermediate fim_intermediate_trace_fd(const GmskWaveform& waveform, const Scenario& scenario,
                                          const IntermediateParams& params,
                                          const Eigen::MatrixXcd& reflection,
                                          const NoiseFactors& noise, const FdSteps& steps) {
  const SteeringSet base = build_steering(waveform, scenario, params);
  if (base.dim() > kTraceOracleMaxDim) {
    throw NumericalError("trace oracle holds P dense NK x NK matrices; reduce K or station counts");
  }
  const CovarianceBundle cov(base.s, reflection, noise);
  const Eigen::VectorXd h = group_fd_steps(base, scenario.gmsk.sample_interval_s(), steps);
  const Eigen::VectorXd stacked = params.stacked();

  std::vector<Mat> derivs;
  derivs.reserve(stacked.size());
  for (int i = 0; i < stacked.size(); ++i) {
    Eigen::VectorXd up = stacked, dn = stacked;
    up(i) += h(i);
    dn(i) -= h(i);
    const auto p_up = IntermediateParams::from_stacked(up, base.num_tx, base.num_rx);
    const auto p_dn = IntermediateParams::from_stacked(dn, base.num_tx, base.num_rx);
    const SteeringSet s_up = build_steering(waveform, scenario, p_up);
    const SteeringSet s_dn = build_steering(waveform, scenario, p_dn);
    const Mat c_up = s_up.s * reflection * s_up.s.adjoint();
    const Mat c_dn = s_dn.s * reflection * s_dn.s.adjoint();
    derivs.push_back((c_up - c_dn) / (2.0 * h(i)));
  }
  return trace_fim_from_derivatives(cov, std::move(derivs), base.num_tx, base.num_rx);
}

FimTheta fim_theta(const FimIntermediate& fim, const JacobianBlocks& jac) {
  const Eigen::MatrixXd t = jac.assembled();
  if (t.cols() != fim.j.rows()) {
    throw std::invalid_argument("jacobian and FIM dimensions do not match");
  }
  FimTheta out;
  Eigen::Matrix4d j4 = t * fim.j * t.transpose();
  j4 = 0.5 * (j4 + j4.transpose()).eval();
  out.fim = j4;
  const PsdInverse inv = psd_pseudo_inverse(j4);
  out.crb = inv.inverse;
  out.condition = inv.condition;
  out.reliable = inv.reliable;
  if (inv.null_direction.size() == 4) out.null_direction = inv.null_direction;
  return out;
}

Eigen::Matrix4d fim_theta_trace_fd(const GmskWaveform& waveform, const Scenario& scenario,
                                   const TargetState& target, const Eigen::MatrixXcd& reflection,
                                   const NoiseFactors& noise, const FdSteps& steps) {
  const SteeringSet base = build_steering(waveform, scenario, target);
  if (base.dim() > kTraceOracleMaxDim) {
    throw NumericalError("trace oracle holds dense NK x NK matrices; reduce K or station counts");
  }
  const CovarianceBundle cov(base.s, reflection, noise);

  std::vector<Mat> derivs;
  derivs.reserve(4);
  for (int i = 0; i < 4; ++i) {
    const double h = i < 2 ? steps.position_m : steps.velocity_mps;
    Eigen::Vector4d up = target.stacked(), dn = target.stacked();
    up(i) += h;
    dn(i) -= h;
    const SteeringSet s_up = build_steering(waveform, scenario, TargetState::from_stacked(up));
    const SteeringSet s_dn = build_steering(waveform, scenario, TargetState::from_stacked(dn));
    const Mat c_up = s_up.s * reflection * s_up.s.adjoint();
    const Mat c_dn = s_dn.s * reflection * s_dn.s.adjoint();
    derivs.push_back((c_up - c_dn) / (2.0 * h));
  }

  Eigen::Matrix4d j4;
  std::array<Mat, 4> a;
  for (int i = 0; i < 4; ++i) a[i] = cov.solve(derivs[i]);
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      const double v = a[i].cwiseProduct(a[j].transpose()).sum().real();
      j4(i, j) = v;
      j4(j, i) = v;
    }
  }
  return j4;
}

ChainRuleExpansionReport validate_chain_rule_expansion(const FimIntermediate& fim,
                                                       const JacobianBlocks& jac) {
  const int m_tx = fim.num_tx, n_rx = fim.num_rx, nm = m_tx * n_rx;
  const Eigen::MatrixXd t = jac.assembled();

  ChainRuleExpansionReport rep;
  rep.product = t * fim.j * t.transpose();

  // Literal scalar expansion: quadruple sum over path pairs. Each theta
  // component weights tau/f through per-path entries and d_t/d_r through
  // per-station entries; the 1/N and 1/M divisors compensate the duplicate
  // summation over the station index the range parameters do not depend on.
  const int o_f = nm, o_dt = 2 * nm, o_dr = 2 * nm + m_tx;
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) {
      const int c = m_tx * n + m;
      for (int p = 0; p < n_rx; ++p) {
        for (int q = 0; q < m_tx; ++q) {
          const int d = m_tx * p + q;
          for (int r = 0; r < 4; ++r) {
            const double wr[4] = {t(r, c), t(r, o_f + c), t(r, o_dt + m) / n_rx,
                                  t(r, o_dr + n) / m_tx};
            const int ri[4] = {c, o_f + c, o_dt + m, o_dr + n};
            for (int s = 0; s < 4; ++s) {
              const double ws[4] = {t(s, d), t(s, o_f + d), t(s, o_dt + q) / n_rx,
                                    t(s, o_dr + p) / m_tx};
              const int ci[4] = {d, o_f + d, o_dt + q, o_dr + p};
              double sum = 0.0;
              for (int u = 0; u < 4; ++u) {
                for (int v = 0; v < 4; ++v) {
                  sum += wr[u] * ws[v] * fim.j(ri[u], ci[v]);
                }
              }
              acc(r, s) += sum;
            }
          }
        }
      }
    }
  }
  rep.expansion = acc;
  rep.max_abs_discrepancy = (rep.expansion - rep.product).cwiseAbs().maxCoeff();
  const double scale = rep.product.cwiseAbs().maxCoeff();
  rep.max_rel_discrepancy = scale > 0.0 ? rep.max_abs_discrepancy / scale : 0.0;
  return rep;
}

EcrbobResult ecrbob(const Scenario& scenario, int num_draws, RngStream& rng) {
  scenario.validate();
  if (num_draws < 1) throw std::invalid_argument("ecrbob needs at least one draw");

  const Eigen::MatrixXcd reflection = build_reflection_covariance(scenario);
  const NoiseFactors noise = build_noise_factors(scenario);
  const double lambda = scenario.gmsk.wavelength_m();
  const IntermediateParams truth =
      intermediate_params(scenario.layout, scenario.target, lambda);
  const JacobianBlocks jac = jacobian(scenario.layout, scenario.target, lambda);

  EcrbobResult out;
  Eigen::Matrix4d mean = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d m2 = Eigen::Matrix4d::Zero();
  for (int d = 0; d < num_draws; ++d) {
    const GmskWaveform waveform(scenario.gmsk, random_bits(rng, scenario.num_tx(),
                                                           scenario.gmsk.num_bits));
    const SteeringSet steering = build_steering(waveform, scenario, truth);
    const CovarianceBundle cov(steering.s, reflection, noise);
    const FimTheta ft = fim_theta(fim_intermediate_closed_form(steering, reflection, cov), jac);
    if (!ft.reliable) {
      ++out.singular_draws;
      continue;
    }
    ++out.draws_used;
    const Eigen::Matrix4d delta = ft.crb - mean;
    mean += delta / out.draws_used;
    m2 += delta.cwiseProduct(ft.crb - mean);
  }

  if (out.singular_draws * 10 > num_draws) {
    throw NumericalError("more than 10% of bit draws produced a singular information matrix");
  }
  if (out.draws_used == 0) throw NumericalError("all bit draws failed");
  out.mean_crb = mean;
  if (out.draws_used > 1) {
    out.stderr_crb =
        (m2 / (static_cast<double>(out.draws_used) * (out.draws_used - 1))).cwiseSqrt();
  }
  return out;
}

MismatchedFimResult fim_mismatched(const SteeringSet& assumed, const SteeringSet& truth,
                                   const Eigen::MatrixXcd& reflection, const NoiseFactors& noise,
                                   int num_samples, RngStream& rng) {
  if (num_samples < 2) throw std::invalid_argument("fim_mismatched needs at least two samples");
  if (assumed.dim() != truth.dim() || assumed.num_paths() != truth.num_paths()) {
    throw std::invalid_argument("assumed and true steering sets have mismatched shapes");
  }
  const int m_tx = assumed.num_tx, n_rx = assumed.num_rx, nm = assumed.num_paths();
  const int p = 2 * nm + m_tx + n_rx;
  const int dim = assumed.dim();

  const CovarianceBundle c0(assumed.s, reflection, noise);
  const CovarianceBundle c1(truth.s, reflection, noise);

  // Integrability of the importance-weighted expectation: 2 C0^{-1} - C1^{-1}
  // must be positive definite.
  {
    const Mat id = Mat::Identity(dim, dim);
    const Mat gap = 2.0 * c0.solve(id) - c1.solve(id);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (gap + gap.adjoint()));
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      throw NumericalError("mismatch too large: 2 C0^{-1} - C1^{-1} is not positive definite");
    }
  }

  const Mat c1_sqrt = hermitian_sqrt<Cplx>(c1.dense());

  // Score kernels of the assumed model. tr_i = tr(C0^{-1} dC0_i) reduces to
  // diagonal entries of R S0^H C0^{-1} X0_a; the quadratic form reduces to
  // per-path products of (X0_a^H y) and R (S0^H y) with y = C0^{-1} r.
  const auto xs = derivative_sets(assumed);
  const Mat cinv_s0 = c0.solve(assumed.s);
  std::array<Eigen::VectorXd, 4> trace_vec;
  for (int a = 0; a < 4; ++a) {
    const Mat rg = reflection * (cinv_s0.adjoint() * (*xs[a]));
    trace_vec[a] = 2.0 * rg.diagonal().real();
  }

  auto fold_tx = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_tx);
    for (int n = 0; n < n_rx; ++n)
      for (int m = 0; m < m_tx; ++m) out(m) += v(m_tx * n + m);
    return out;
  };
  auto fold_rx = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_rx);
    for (int n = 0; n < n_rx; ++n)
      for (int m = 0; m < m_tx; ++m) out(n) += v(m_tx * n + m);
    return out;
  };

  MismatchedFimResult out;
  out.samples = num_samples;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd diag_mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd diag_m2 = Eigen::VectorXd::Zero(p);
  double w_mean = 0.0, w_m2 = 0.0;

  Eigen::VectorXcd g(dim), r(dim), y(dim);
  Eigen::VectorXd score(p);
  for (int it = 1; it <= num_samples; ++it) {
    for (int i = 0; i < dim; ++i) g(i) = rng.complex_normal();
    r = c1_sqrt * g;

    const double logw = 2.0 * (c0.log_likelihood(r) - c1.log_likelihood(r));
    const double w = std::exp(logw);

    y = c0.solve(r);
    const Eigen::VectorXcd ru = reflection * (assumed.s.adjoint() * y);
    for (int a = 0; a < 4; ++a) {
      const Eigen::VectorXcd va = xs[a]->adjoint() * y;
      const Eigen::VectorXd quad = 2.0 * va.conjugate().cwiseProduct(ru).real();
      const Eigen::VectorXd vec = quad - trace_vec[a];
      switch (a) {
        case 0: score.segment(0, nm) = vec; break;
        case 1: score.segment(nm, nm) = vec; break;
        case 2: score.segment(2 * nm, m_tx) = fold_tx(vec); break;
        case 3: score.segment(2 * nm + m_tx, n_rx) = fold_rx(vec); break;
      }
    }

    acc.noalias() += w * (score * score.transpose());
    const Eigen::VectorXd dsq = w * score.cwiseProduct(score);
    const Eigen::VectorXd delta = dsq - diag_mean;
    diag_mean += delta / it;
    diag_m2 += delta.cwiseProduct(dsq - diag_mean);
    const double wd = w - w_mean;
    w_mean += wd / it;
    w_m2 += wd * (w - w_mean);
  }

  out.j = acc / num_samples;
  out.j = 0.5 * (out.j + out.j.transpose()).eval();
  out.diag_stderr =
      (diag_m2 / (static_cast<double>(num_samples) * (num_samples - 1))).cwiseSqrt();
  const double w_se = std::sqrt(w_m2 / (static_cast<double>(num_samples) * (num_samples - 1)));
  out.weight_rel_stderr = w_mean > 0.0 ? w_se / w_mean : std::numeric_limits<double>::infinity();
  out.weight_warning = out.weight_rel_stderr > 0.1;
  return out;
}

void write_fim_csv(std::ostream& os, const FimIntermediate& fim, const FimTheta* theta) {
  static const char* names[4] = {"delay", "doppler", "range_tx", "range_rx"};
  os << "block,i,j,value\n";
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const auto ga = static_cast<ParamGroup>(a);
      const auto gb = static_cast<ParamGroup>(b);
      const Eigen::MatrixXd blk = fim.block(ga, gb);
      for (int i = 0; i < blk.rows(); ++i) {
        for (int j = 0; j < blk.cols(); ++j) {
          os << names[a] << '_' << names[b] << ',' << i << ',' << j << ','
             << format_double(blk(i, j)) << '\n';
        }
      }
    }
  }
  if (theta) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        os << "theta_fim," << i << ',' << j << ',' << format_double(theta->fim(i, j)) << '\n';
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        os << "theta_crb," << i << ',' << j << ',' << format_double(theta->crb(i, j)) << '\n';
  }
}

}  // namespace radarcrb
