#pragma once

// Time integration: the metric Ricci flow in P-coordinates, the plain /
// unimodular / gauged bracket flows, conjugation tracking between the two
// pictures, beta-volume and Lyapunov evaluation, blow-downs, and the
// algebraic-collapse diagnostic.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bracketflow/bracket.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"
#include "bracketflow/stratification.hpp"
#include "bracketflow/stratum_label.hpp"

namespace bracketflow {

enum class FlowVariant { Plain, Unimodular, Gauged };

inline const char* to_string(FlowVariant v) {
  switch (v) {
    case FlowVariant::Plain: return "plain";
    case FlowVariant::Unimodular: return "unimodular";
    default: return "gauged";
  }
}

enum class TerminationStatus { Completed, BlowUp };

struct FlowOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double dt_init = 1e-6;
  double dt_min = 1e-14;        // blow-up ceiling on the step size
  double ric_ceiling = 1e8;     // blow-up ceiling on ||Ric~||
  double jacobi_ceiling = 1e-7; // relative Jacobi-residual ceiling (veto)
  long max_steps = 5000000;
  std::vector<double> sample_times;  // empty: record every accepted step
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Bracket> states;
  std::vector<Matrix> metric_states;  // metric flow only
  std::vector<Matrix> gauges;         // accumulated h(t) on m
  std::vector<double> scal, scal_mod, ric_mod_norm, jacobi;
  std::vector<double> f_beta, v_beta;  // NaN unless gauged variant
  std::vector<double> norm_mu_m, norm_mu_h, ratio_ric_scal;
  TerminationStatus termination = TerminationStatus::Completed;
  std::string message;

  size_t size() const { return times.size(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DP54 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

struct IntegrationResult {
  bool reached_end = false;
  bool step_underflow = false;
  bool hit_max_steps = false;
  bool stopped = false;  // observer requested stop
  double t_final = 0.0;
};

// Adaptive embedded RK5(4). observe(t, y) is called after each accepted step
// and may stop the run; veto(y_candidate) rejects a step before acceptance
// (used for invariant monitors). RHS failures (thrown Error) reject the step.
template <class RHS, class Veto, class Observer>
IntegrationResult integrate_dp54(RHS&& f, Vector& y, double t0, double t1,
                                 const FlowOptions& o, Veto&& veto, Observer&& observe,
                                 const std::vector<double>& targets = {}) {
  IntegrationResult res;
  double t = t0;
  double dt = o.dt_init;
  size_t next_target = 0;
  while (next_target < targets.size() && targets[next_target] <= t + 1e-15) ++next_target;

  Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
      k6(y.size()), k7(y.size()), y5(y.size()), err(y.size());
  for (long step = 0; step < o.max_steps; ++step) {
    if (t >= t1 - 1e-15 * std::max(1.0, std::abs(t1))) {
      res.reached_end = true;
      break;
    }
    double target = t1;
    if (next_target < targets.size()) target = std::min(target, targets[next_target]);
    double h = std::min(dt, target - t);
    if (h < o.dt_min && target - t > 2.0 * o.dt_min) {
      res.step_underflow = true;
      break;
    }
    h = std::max(h, std::min(o.dt_min, target - t));

    bool ok = true;
    double errn = 0.0;
    try {
      k1 = f(t, y);
      k2 = f(t + DP54::c2 * h, Vector(y + h * (DP54::a21 * k1)));
      k3 = f(t + DP54::c3 * h, Vector(y + h * (DP54::a31 * k1 + DP54::a32 * k2)));
      k4 = f(t + DP54::c4 * h, Vector(y + h * (DP54::a41 * k1 + DP54::a42 * k2 + DP54::a43 * k3)));
      k5 = f(t + DP54::c5 * h,
             Vector(y + h * (DP54::a51 * k1 + DP54::a52 * k2 + DP54::a53 * k3 + DP54::a54 * k4)));
      k6 = f(t + h, Vector(y + h * (DP54::a61 * k1 + DP54::a62 * k2 + DP54::a63 * k3 +
                                    DP54::a64 * k4 + DP54::a65 * k5)));
      y5 = y + h * (DP54::b1 * k1 + DP54::b3 * k3 + DP54::b4 * k4 + DP54::b5 * k5 + DP54::b6 * k6);
      k7 = f(t + h, y5);
      err = h * (DP54::e1 * k1 + DP54::e3 * k3 + DP54::e4 * k4 + DP54::e5 * k5 + DP54::e6 * k6 +
                 DP54::e7 * k7);
      double acc = 0.0;
      for (int i = 0; i < y.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
        const double q = err(i) / sc;
        acc += q * q;
      }
      errn = std::sqrt(acc / static_cast<double>(y.size()));
    } catch (const Error&) {
      ok = false;  // curvature/factorization failure at a trial state
    }

    if (ok && errn <= 1.0 && veto(y5)) ok = false;

    if (!ok || errn > 1.0) {
      const double shrink = ok ? std::max(0.2, 0.9 * std::pow(errn, -0.2)) : 0.25;
      dt = h * std::min(shrink, 0.9);
      if (dt < o.dt_min) {
        res.step_underflow = true;
        break;
      }
      continue;
    }

    t += h;
    y = y5;
    dt = h * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(errn, 1e-16), -0.2)));
    bool at_target = next_target < targets.size() &&
                     std::abs(t - targets[next_target]) <= 1e-9 * std::max(1.0, std::abs(t));
    if (at_target) ++next_target;
    if (!observe(t, y, at_target)) {
      res.stopped = true;
      break;
    }
    if (step + 1 == o.max_steps) res.hit_max_steps = true;
  }
  res.t_final = t;
  return res;
}

inline Matrix embed_on_m(int n, int dh, const Matrix& a_m) {
  Matrix full = Matrix::Zero(n, n);
  full.bottomRightCorner(a_m.rows(), a_m.cols()) = a_m;
  return full;
}

inline Bracket bracket_from_coords(const Bracket& proto, const Vector& y, int offset = 0) {
  Bracket b = proto;
  for (size_t i = 0; i < b.data().size(); ++i) b.data()[i] = y(offset + static_cast<int>(i));
  return b;
}

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace detail

// --- beta-volume ------------------------------------------------------------

// Product formula from the triangular factor of the metric: with P = h^t h and
// T lower-triangular, T^t T = P in the label basis, v = prod T_ii^{-(beta_m)_i}.
inline double beta_volume_metric(const Matrix& p_on_m, const StratumLabel& label) {
  const int dm = label.dim_m();
  if (p_on_m.rows() != dm || p_on_m.cols() != dm)
    throw DimensionMismatch("metric must act on m");
  const Matrix q_m = label.vectors.bottomRightCorner(dm, dm);
  const Matrix p_label = q_m.transpose() * p_on_m * q_m;
  const Matrix t = lower_triangular_gauge(p_label);
  const Vector bm = label.beta_m.diagonal();
  double v = 1.0;
  for (int i = 0; i < dm; ++i) v *= std::pow(t(i, i), -bm(i));
  return v;
}

// Product formula from a gauge h in Q_beta: h must be block-lower-triangular
// with respect to the eigenvalue clusters (in the label basis); then
// v = prod over clusters |det(diagonal block)|^{-beta_cluster}.
inline double beta_volume_gauge(const Matrix& h_on_m, const StratumLabel& label) {
  const int dm = label.dim_m();
  if (h_on_m.rows() != dm || h_on_m.cols() != dm)
    throw DimensionMismatch("gauge must act on m");
  const Matrix q_m = label.vectors.bottomRightCorner(dm, dm);
  const Matrix h = q_m.transpose() * h_on_m * q_m;
  const Vector vm = label.eigenvalues.tail(dm);
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j)
      if (vm(i) < vm(j) - 1e-12 && std::abs(h(i, j)) > 1e-10 * std::max(1.0, h.norm()))
        throw NonTriangularGauge("gauge leaves the parabolic subgroup of the label");
  const Vector bm = label.beta_m.diagonal();
  double v = 1.0;
  int i = 0;
  while (i < dm) {
    int j = i;
    while (j + 1 < dm && vm(j + 1) - vm(i) <= 1e-12) ++j;
    const double det = h.block(i, i, j - i + 1, j - i + 1).determinant();
    if (det == 0.0) throw SingularMatrix("singular diagonal block in the gauge");
    v *= std::pow(std::abs(det), -bm(i));  // bm is constant on the cluster
    i = j + 1;
  }
  return v;
}

inline double lyapunov_F(const Bracket& b, double v, const StratumLabel& label) {
  (void)label;
  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;
  return v * v * curvature_report(b, copts).scal_mod;
}

// --- bracket flow -----------------------------------------------------------

// Integrates dmu/dt = -pi(W(mu))mu with
//   plain:      W = Ric   (full Ricci endomorphism)
//   unimodular: W = Ric~
//   gauged:     W = Ric~ - X_q(Ric~)   (requires the stratum label)
// The conjugation h(t) with mu(t) = h(t).mu0 is tracked via h' = -W h for all
// variants; the gauged variant also integrates u = log v_beta via
// u' = <Ric~, beta_m> and records v_beta = e^u, F_beta = v^2 scal~.
inline FlowTrajectory bracket_flow(const Bracket& mu0, double t_end, FlowVariant variant,
                                   const StratumLabel* label = nullptr,
                                   const FlowOptions& opts = {}) {
  if (variant == FlowVariant::Gauged && label == nullptr)
    throw BadConfig("gauged flow requires a stratum label");
  const int n = mu0.n(), dh = mu0.dim_h(), dm = mu0.dim_m();
  const size_t nc = mu0.data().size();

  // The beta-group bases live in the label basis, so the gauged variant
  // conjugates curvature through q_m before projecting and back after.
  BetaGroups groups;
  Matrix qm, beta_m_orig;
  if (variant == FlowVariant::Gauged) {
    qm = label->q_m();
    beta_m_orig = label->beta_m_original();
    std::vector<Matrix> iso;
    if (dh > 0)
      for (const Matrix& a : isotropy_generators(mu0))
        iso.push_back(qm.transpose() * a * qm);
    groups = beta_groups(*label, iso);
  }

  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;

  auto w_of = [&](const CurvatureReport& rep) -> Matrix {
    switch (variant) {
      case FlowVariant::Plain: return rep.ric;
      case FlowVariant::Unimodular: return rep.ric_mod;
      default: {
        const Matrix a_k = x_q_projection(qm.transpose() * rep.ric_mod * qm, groups);
        return rep.ric_mod - qm * a_k * qm.transpose();
      }
    }
  };

  // State: [mu coords | h (dm x dm, row-major) | u]
  Vector y(static_cast<int>(nc) + dm * dm + 1);
  for (size_t i = 0; i < nc; ++i) y(static_cast<int>(i)) = mu0.data()[i];
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) y(static_cast<int>(nc) + i * dm + j) = (i == j) ? 1.0 : 0.0;
  y(y.size() - 1) = 0.0;

  auto unpack_h = [&](const Vector& yy) {
    Matrix h(dm, dm);
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) h(i, j) = yy(static_cast<int>(nc) + i * dm + j);
    return h;
  };

  auto rhs = [&](double, const Vector& yy) -> Vector {
    const Bracket b = detail::bracket_from_coords(mu0, yy);
    const CurvatureReport rep = curvature_report(b, copts);
    const Matrix w = w_of(rep);
    const Bracket db = pi_action(detail::embed_on_m(n, dh, w), b);
    const Matrix h = unpack_h(yy);
    const Matrix dhm = -w * h;
    Vector dy(yy.size());
    for (size_t i = 0; i < nc; ++i) dy(static_cast<int>(i)) = -db.data()[i];
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) dy(static_cast<int>(nc) + i * dm + j) = dhm(i, j);
    dy(yy.size() - 1) =
        variant == FlowVariant::Gauged ? (rep.ric_mod.transpose() * beta_m_orig).trace() : 0.0;
    return dy;
  };

  FlowTrajectory traj;
  const double jac0 = jacobi_residual(mu0) / std::max(bracket_inner(mu0, mu0), 1e-300);
  const double jac_ceiling = std::max(opts.jacobi_ceiling, 100.0 * jac0);
  bool jacobi_veto_hit = false;

  auto veto = [&](const Vector& yy) {
    const Bracket b = detail::bracket_from_coords(mu0, yy);
    const double rel = jacobi_residual(b) / std::max(bracket_inner(b, b), 1e-300);
    if (rel > jac_ceiling) {
      jacobi_veto_hit = true;
      return true;
    }
    return false;
  };

  bool blowup = false;
  auto record = [&](double t, const Vector& yy) {
    const Bracket b = detail::bracket_from_coords(mu0, yy);
    const CurvatureReport rep = curvature_report(b, copts);
    traj.times.push_back(t);
    traj.states.push_back(b);
    traj.gauges.push_back(unpack_h(yy));
    traj.scal.push_back(rep.scal);
    traj.scal_mod.push_back(rep.scal_mod);
    traj.ric_mod_norm.push_back(rep.ric_mod.norm());
    traj.jacobi.push_back(jacobi_residual(b));
    const double u = yy(yy.size() - 1);
    if (variant == FlowVariant::Gauged) {
      traj.v_beta.push_back(std::exp(u));
      traj.f_beta.push_back(std::exp(2.0 * u) * rep.scal_mod);
    } else {
      traj.v_beta.push_back(detail::nan_value());
      traj.f_beta.push_back(detail::nan_value());
    }
    traj.norm_mu_m.push_back(norm_mu_m(b));
    traj.norm_mu_h.push_back(norm_mu_h(b));
    const double rn = rep.ric.norm();
    traj.ratio_ric_scal.push_back(std::abs(rep.scal) > 0 ? rn / std::abs(rep.scal)
                                                         : detail::nan_value());
    return rep.ric_mod.norm() <= opts.ric_ceiling;
  };

  if (!record(0.0, y)) {
    traj.termination = TerminationStatus::BlowUp;
    traj.message = "curvature ceiling exceeded at t = 0";
    return traj;
  }

  auto observe = [&](double t, const Vector& yy, bool at_target) {
    if (!opts.sample_times.empty() && !at_target && t < t_end - 1e-15) return true;
    if (!record(t, yy)) {
      blowup = true;
      return false;
    }
    return true;
  };

  const auto res = detail::integrate_dp54(rhs, y, 0.0, t_end, opts, veto, observe,
                                          opts.sample_times);
  if (blowup) {
    traj.termination = TerminationStatus::BlowUp;
    traj.message = "curvature ceiling ||Ric~|| > " + std::to_string(opts.ric_ceiling) +
                   " at t = " + std::to_string(res.t_final);
  } else if (res.step_underflow) {
    if (jacobi_veto_hit) throw JacobiDrift("persistent Jacobi-residual violation");
    traj.termination = TerminationStatus::BlowUp;
    traj.message = "step size underflow at t = " + std::to_string(res.t_final) +
                   " (finite-time singularity)";
    if (traj.times.empty() || traj.times.back() < res.t_final - 1e-12) record(res.t_final, y);
  } else if (res.hit_max_steps) {
    traj.termination = TerminationStatus::BlowUp;
    traj.message = "step budget exhausted at t = " + std::to_string(res.t_final);
  } else {
    traj.termination = TerminationStatus::Completed;
    traj.message = "reached t = " + std::to_string(res.t_final);
    if (traj.times.empty() || traj.times.back() < res.t_final - 1e-12) record(res.t_final, y);
  }
  return traj;
}

// --- metric Ricci flow -------------------------------------------------------

struct MetricState {
  Matrix P;
};

// Integrates dP/dt = -2 P Ric^g in P-coordinates; Ric^g at P is computed by
// factoring P = T^t T (T lower triangular), forming mu = T.lambda, and pulling
// Ric_mu back: Ric^g = T^{-1} Ric_mu T, so dP = -2 T^t Ric_mu T.
inline FlowTrajectory metric_ricci_flow(const Bracket& lambda, const MetricState& g0,
                                        double t_end, const FlowOptions& opts = {}) {
  const int n = lambda.n(), dh = lambda.dim_h(), dm = lambda.dim_m();
  if (g0.P.rows() != dm || g0.P.cols() != dm)
    throw DimensionMismatch("metric state must act on m");
  if ((g0.P - g0.P.transpose()).norm() > 1e-10 * std::max(1.0, g0.P.norm()))
    throw DimensionMismatch("metric state must be symmetric");

  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;

  auto bracket_at = [&](const Matrix& p) {
    const Matrix t = lower_triangular_gauge(p);
    Matrix t_full = Matrix::Identity(n, n);
    t_full.bottomRightCorner(dm, dm) = t;
    return std::make_pair(t, act(t_full, lambda));
  };

  Vector y(dm * dm);
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) y(i * dm + j) = g0.P(i, j);

  auto unpack_p = [&](const Vector& yy) {
    Matrix p(dm, dm);
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) p(i, j) = yy(i * dm + j);
    return Matrix(sym(p));
  };

  auto rhs = [&](double, const Vector& yy) -> Vector {
    const Matrix p = unpack_p(yy);
    const auto [t, b] = bracket_at(p);
    const CurvatureReport rep = curvature_report(b, copts);
    const Matrix dp = -2.0 * sym(t.transpose() * rep.ric * t);
    Vector dy(yy.size());
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) dy(i * dm + j) = dp(i, j);
    return dy;
  };

  FlowTrajectory traj;
  bool blowup = false;
  std::string blow_reason;
  auto record = [&](double t, const Vector& yy) {
    const Matrix p = unpack_p(yy);
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    if (es.eigenvalues()(0) < 1e-12) {
      blow_reason = "metric degenerated (min eigenvalue < 1e-12)";
      return false;
    }
    const auto [tfac, b] = bracket_at(p);
    const CurvatureReport rep = curvature_report(b, copts);
    traj.times.push_back(t);
    traj.states.push_back(b);
    traj.metric_states.push_back(p);
    traj.gauges.push_back(tfac);
    traj.scal.push_back(rep.scal);
    traj.scal_mod.push_back(rep.scal_mod);
    traj.ric_mod_norm.push_back(rep.ric_mod.norm());
    traj.jacobi.push_back(jacobi_residual(b));
    traj.v_beta.push_back(detail::nan_value());
    traj.f_beta.push_back(detail::nan_value());
    traj.norm_mu_m.push_back(norm_mu_m(b));
    traj.norm_mu_h.push_back(norm_mu_h(b));
    const double rn = rep.ric.norm();
    traj.ratio_ric_scal.push_back(std::abs(rep.scal) > 0 ? rn / std::abs(rep.scal)
                                                         : detail::nan_value());
    if (rep.ric_mod.norm() > opts.ric_ceiling) {
      blow_reason = "curvature ceiling exceeded";
      return false;
    }
    return true;
  };

  if (!record(0.0, y)) {
    traj.termination = TerminationStatus::BlowUp;
    traj.message = blow_reason + " at t = 0";
    return traj;
  }

  auto observe = [&](double t, const Vector& yy, bool at_target) {
    if (!opts.sample_times.empty() && !at_target && t < t_end - 1e-15) return true;
    if (!record(t, yy)) {
      blowup = true;
      return false;
    }
    return true;
  };
  auto veto = [](const Vector&) { return false; };

  const auto res = detail::integrate_dp54(rhs, y, 0.0, t_end, opts, veto, observe,
                                          opts.sample_times);
  if (blowup || res.step_underflow || res.hit_max_steps) {
    traj.termination = TerminationStatus::BlowUp;
    traj.message = (blowup ? blow_reason
                           : res.step_underflow ? std::string("step size underflow")
                                                : std::string("step budget exhausted")) +
                   " at t = " + std::to_string(res.t_final);
  } else {
    traj.termination = TerminationStatus::Completed;
    traj.message = "reached t = " + std::to_string(res.t_final);
    if (traj.times.empty() || traj.times.back() < res.t_final - 1e-12) record(res.t_final, y);
  }
  return traj;
}

// --- equivalence of the two pictures -----------------------------------------

// Runs the metric flow and the plain bracket flow side by side from the same
// initial metric, tracks h(t) via h' = -h Ric^{g(t)}, and returns the sup over
// accepted steps of the entrywise gap between the Ricci bilinear forms
// P Ric^g and h^t Ric_mu h.
inline double equivalence_check(const Bracket& lambda, const MetricState& g0, double t_end,
                                const FlowOptions& opts = {}) {
  const int n = lambda.n(), dh = lambda.dim_h(), dm = lambda.dim_m();
  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;

  const Matrix t0 = lower_triangular_gauge(g0.P);
  Matrix t0_full = Matrix::Identity(n, n);
  t0_full.bottomRightCorner(dm, dm) = t0;
  const Bracket mu0 = act(t0_full, lambda);
  const size_t nc = mu0.data().size();

  // State: [P | mu | h]
  Vector y(dm * dm + static_cast<int>(nc) + dm * dm);
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) y(i * dm + j) = g0.P(i, j);
  for (size_t i = 0; i < nc; ++i) y(dm * dm + static_cast<int>(i)) = mu0.data()[i];
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) y(dm * dm + static_cast<int>(nc) + i * dm + j) = t0(i, j);

  auto unpack = [&](const Vector& yy) {
    Matrix p(dm, dm), h(dm, dm);
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) {
        p(i, j) = yy(i * dm + j);
        h(i, j) = yy(dm * dm + static_cast<int>(nc) + i * dm + j);
      }
    return std::make_pair(Matrix(sym(p)), h);
  };

  auto rhs = [&](double, const Vector& yy) -> Vector {
    const auto [p, h] = unpack(yy);
    const Matrix t = lower_triangular_gauge(p);
    Matrix t_full = Matrix::Identity(n, n);
    t_full.bottomRightCorner(dm, dm) = t;
    const CurvatureReport rep_p = curvature_report(act(t_full, lambda), copts);
    const Matrix ric_g = t.lu().solve(rep_p.ric * t);  // T^{-1} Ric_mu T

    const Bracket b = detail::bracket_from_coords(mu0, yy, dm * dm);
    const CurvatureReport rep_mu = curvature_report(b, copts);
    const Bracket db = pi_action(detail::embed_on_m(n, dh, rep_mu.ric), b);

    Vector dy(yy.size());
    const Matrix dp = -2.0 * sym(t.transpose() * rep_p.ric * t);
    const Matrix dhm = -h * ric_g;
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) {
        dy(i * dm + j) = dp(i, j);
        dy(dm * dm + static_cast<int>(nc) + i * dm + j) = dhm(i, j);
      }
    for (size_t i = 0; i < nc; ++i) dy(dm * dm + static_cast<int>(i)) = -db.data()[i];
    return dy;
  };

  double sup_residual = 0.0;
  auto observe = [&](double, const Vector& yy, bool) {
    const auto [p, h] = unpack(yy);
    const Matrix t = lower_triangular_gauge(p);
    Matrix t_full = Matrix::Identity(n, n);
    t_full.bottomRightCorner(dm, dm) = t;
    const CurvatureReport rep_p = curvature_report(act(t_full, lambda), copts);
    const Matrix ric_g = t.lu().solve(rep_p.ric * t);
    const Bracket b = detail::bracket_from_coords(mu0, yy, dm * dm);
    const CurvatureReport rep_mu = curvature_report(b, copts);
    const Matrix gap = p * ric_g - h.transpose() * rep_mu.ric * h;
    sup_residual = std::max(sup_residual, gap.cwiseAbs().maxCoeff());
    return true;
  };
  auto veto = [](const Vector&) { return false; };

  detail::integrate_dp54(rhs, y, 0.0, t_end, opts, veto, observe);
  return sup_residual;
}

// --- blow-down and collapse ---------------------------------------------------

// Parabolic blow-down g_s(t) = s^{-1} g(s t): bracket states are rescaled by
// scale_bracket(sqrt(s)) and times divided by s; diagnostics are recomputed.
inline FlowTrajectory blow_down(const FlowTrajectory& traj, double s) {
  if (!(s > 0.0)) throw OutOfRange("blow-down scale must be positive");
  const double c = std::sqrt(s);
  CurvatureOptions copts;
  copts.check_jacobi = false;
  copts.check_splitting = false;
  FlowTrajectory out;
  out.termination = traj.termination;
  out.message = traj.message;
  for (size_t i = 0; i < traj.size(); ++i) {
    const Bracket b = scale_bracket(c, traj.states[i]);
    const CurvatureReport rep = curvature_report(b, copts);
    out.times.push_back(traj.times[i] / s);
    out.states.push_back(b);
    if (!traj.gauges.empty()) out.gauges.push_back(traj.gauges[i] / c);
    out.scal.push_back(rep.scal);
    out.scal_mod.push_back(rep.scal_mod);
    out.ric_mod_norm.push_back(rep.ric_mod.norm());
    out.jacobi.push_back(jacobi_residual(b));
    out.f_beta.push_back(traj.f_beta.empty() ? detail::nan_value() : traj.f_beta[i]);
    out.v_beta.push_back(traj.v_beta.empty() ? detail::nan_value() : traj.v_beta[i] / c);
    out.norm_mu_m.push_back(norm_mu_m(b));
    out.norm_mu_h.push_back(norm_mu_h(b));
    const double rn = rep.ric.norm();
    out.ratio_ric_scal.push_back(std::abs(rep.scal) > 0 ? rn / std::abs(rep.scal)
                                                        : detail::nan_value());
  }
  return out;
}

// Scale-normalized norm entering the Type-III bound: ||mu_m|| + ||mu_h||^{1/2}.
inline double type_iii_quantity(const Bracket& b) {
  return norm_mu_m(b) + std::sqrt(norm_mu_h(b));
}

struct CollapseReport {
  bool bounded = true;
  double sup_norm = 0.0;
  double trend = 0.0;  // log-log slope of the norm over the sequence tail
};

// Boundedness verdict for a (typically sqrt(t)-rescaled) bracket sequence:
// unbounded rescaled norms signal algebraic collapse.
inline CollapseReport collapse_diagnostic(const std::vector<Bracket>& sequence,
                                          double bounded_factor = 2.0) {
  if (sequence.empty()) throw Error("empty bracket sequence");
  CollapseReport rep;
  std::vector<double> norms;
  for (const auto& b : sequence) norms.push_back(type_iii_quantity(b));
  rep.sup_norm = *std::max_element(norms.begin(), norms.end());
  const double base = *std::min_element(norms.begin(), norms.end());
  rep.bounded = rep.sup_norm <= bounded_factor * std::max(base, 1e-300);
  // least-squares slope of log(norm) against log(index+1) over the tail half
  const size_t start = norms.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (size_t i = start; i < norms.size(); ++i) {
    if (norms[i] <= 0) continue;
    const double x = std::log(static_cast<double>(i + 1));
    const double yv = std::log(norms[i]);
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
    ++cnt;
  }
  if (cnt >= 2 && sxx * cnt - sx * sx > 1e-30)
    rep.trend = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  return rep;
}

// 4th-order derivative estimate on a nonuniform grid: differentiates the
// Lagrange polynomial through the five nearest samples at node i.
inline double lagrange_derivative(const std::vector<double>& ts, const std::vector<double>& ys,
                                  size_t i) {
  const size_t n = ts.size();
  if (n < 5) throw Error("need at least five samples");
  size_t lo = i >= 2 ? i - 2 : 0;
  if (lo + 5 > n) lo = n - 5;
  double d = 0.0;
  for (size_t j = lo; j < lo + 5; ++j) {
    // l_j'(t_i) for the Lagrange basis on the five nodes
    double acc = 0.0;
    if (j == i) {
      for (size_t m = lo; m < lo + 5; ++m)
        if (m != i) acc += 1.0 / (ts[i] - ts[m]);
    } else {
      double prod = 1.0 / (ts[j] - ts[i]);
      for (size_t m = lo; m < lo + 5; ++m)
        if (m != j && m != i) prod *= (ts[i] - ts[m]) / (ts[j] - ts[m]);
      acc = prod;
    }
    d += ys[j] * acc;
  }
  return d;
}

}  // namespace bracketflow
