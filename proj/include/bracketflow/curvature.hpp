#pragma once

// Curvature of a homogeneous metric read off its bracket: Killing form,
// moment map, M-tensor, mean curvature, (modified) Ricci endomorphism,
// scalar curvatures, the two main estimates and flat/soliton classification.
//
// All quantities use the fixed background inner product; the metric enters
// only through gauged brackets. The Ricci endomorphism is assembled from
//   Ric = M - (1/2) K|_m - S(ad_m H),    Ric~ = M - (1/2) K|_m,
// with S(A) = (A + A^t)/2 and <H, X> = tr ad X for X in m.

#include <cmath>
#include <string>

#include "bracketflow/bracket.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"
#include "bracketflow/stratum_label.hpp"

namespace bracketflow {

inline Matrix killing_form(const Bracket& b) { return detail::killing_matrix(b); }

// Unnormalized moment map numerator:
//   mm = -1/2 sum_i (ad e_i)^t (ad e_i) + 1/4 sum_i (ad e_i)(ad e_i)^t,
// so that m(mu) = 4 mm / ||mu||^2.
inline Matrix moment_map_raw(const Bracket& b) {
  const int n = b.n();
  Matrix mm = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Matrix a = b.ad(i);
    mm += -0.5 * (a.transpose() * a) + 0.25 * (a * a.transpose());
  }
  return mm;
}

// m(mu), normalized so <m(mu), A> = <pi(A)mu, mu> / ||mu||^2; tr m(mu) = -1.
inline Matrix moment_map(const Bracket& b) {
  const double sq = bracket_inner(b, b);
  if (sq <= 0.0) throw ZeroBracket("moment map undefined at mu = 0");
  return (4.0 / sq) * moment_map_raw(b);
}

struct CurvatureReport {
  Matrix killing;    // N x N
  Matrix moment;     // N x N (zero matrix when mu = 0)
  Matrix M_m;        // dim_m x dim_m
  Matrix P_h;        // dim_m x dim_m
  Vector mean_curv;  // dim_m
  Matrix ric;        // dim_m x dim_m
  Matrix ric_mod;    // dim_m x dim_m
  double scal = 0.0;
  double scal_mod = 0.0;
};

struct CurvatureOptions {
  bool check_jacobi = true;
  double jacobi_tol = 1e-6;
  bool check_splitting = true;
  double splitting_tol = 1e-8;
};

namespace detail {

// ad_m(e_i) for i in m, using only the m ^ m -> m component of the bracket.
inline Matrix ad_m(const Bracket& b, int i_m) {
  const int dh = b.dim_h(), dm = b.dim_m();
  Matrix a(dm, dm);
  for (int j = 0; j < dm; ++j)
    for (int k = 0; k < dm; ++k) a(k, j) = b.at(dh + i_m, dh + j, dh + k);
  return a;
}

}  // namespace detail

// M-tensor of the m-restricted bracket (same structural formula as the
// moment-map numerator, but summed over an m-basis with mu_m only).
inline Matrix m_tensor(const Bracket& b) {
  const int dm = b.dim_m();
  Matrix m = Matrix::Zero(dm, dm);
  for (int i = 0; i < dm; ++i) {
    const Matrix a = detail::ad_m(b, i);
    m += -0.5 * (a.transpose() * a) + 0.25 * (a * a.transpose());
  }
  return m;
}

// P-tensor: <P X, Y> = 1/2 sum_{i in m} <mu(X, e_i)_h, mu(Y, e_i)_h>.
inline Matrix p_tensor(const Bracket& b) {
  const int dh = b.dim_h(), dm = b.dim_m();
  Matrix p = Matrix::Zero(dm, dm);
  for (int x = 0; x < dm; ++x)
    for (int y = 0; y <= x; ++y) {
      double s = 0.0;
      for (int i = 0; i < dm; ++i)
        for (int z = 0; z < dh; ++z) s += b.at(dh + x, dh + i, z) * b.at(dh + y, dh + i, z);
      p(x, y) = 0.5 * s;
      p(y, x) = p(x, y);
    }
  return p;
}

inline Vector mean_curvature(const Bracket& b) {
  const int dh = b.dim_h(), dm = b.dim_m(), n = b.n();
  Vector h(dm);
  for (int x = 0; x < dm; ++x) {
    double t = 0.0;
    for (int j = 0; j < n; ++j) t += b.at(dh + x, j, j);
    h(x) = t;
  }
  return h;
}

inline CurvatureReport curvature_report(const Bracket& b, const CurvatureOptions& opts = {}) {
  if (opts.check_splitting && b.splitting_violation() > opts.splitting_tol)
    throw SplittingViolation("bracket not compatible with the h (+) m splitting");
  if (opts.check_jacobi &&
      jacobi_residual(b) > opts.jacobi_tol * (1.0 + bracket_inner(b, b)))
    throw NotALieBracket("jacobi residual above tolerance");

  const int dh = b.dim_h(), dm = b.dim_m();
  CurvatureReport r;
  r.killing = killing_form(b);
  const double sq = bracket_inner(b, b);
  r.moment = sq > 0.0 ? moment_map(b) : Matrix::Zero(b.n(), b.n());
  r.M_m = m_tensor(b);
  r.P_h = p_tensor(b);
  r.mean_curv = mean_curvature(b);

  Matrix ad_h = Matrix::Zero(dm, dm);
  for (int x = 0; x < dm; ++x)
    if (r.mean_curv(x) != 0.0) ad_h += r.mean_curv(x) * detail::ad_m(b, x);

  const Matrix k_m = r.killing.bottomRightCorner(dm, dm);
  r.ric_mod = r.M_m - 0.5 * k_m;
  r.ric = r.ric_mod - sym(ad_h);
  r.scal = r.ric.trace();
  r.scal_mod = r.ric_mod.trace();
  return r;
}

// || m-block of (||mu||^2/4) m(mu) - M + P ||: certifies the moment-map and
// curvature implementations agree (they are independent code paths).
inline double m_identity_check(const Bracket& b) {
  const int dh = b.dim_h(), dm = b.dim_m();
  const Matrix mm = moment_map_raw(b);
  return (mm.bottomRightCorner(dm, dm) - m_tensor(b) + p_tensor(b)).norm();
}

struct EstimateReport {
  double pairing_beta_plus = 0.0;  // <Ric~, beta^+|_m>
  double gap = 0.0;                // ||Ric~|| - |scal~| ||beta_m||
  double equality_residual = 0.0;  // ||Ric~ + scal~ beta_m||
};

// Estimates of the gauged setting; they only hold at scal~ < 0, and expect
// a mu already gauged into V^{>=0} (caller's responsibility).
inline EstimateReport estimates(const Bracket& b, const StratumLabel& label,
                                const CurvatureOptions& opts = {}) {
  const CurvatureReport r = curvature_report(b, opts);
  if (r.scal_mod >= 0.0)
    throw ScalModNonnegative("estimate suite requires scal~ < 0, got scal~ = " +
                             std::to_string(r.scal_mod));
  EstimateReport e;
  e.pairing_beta_plus = (r.ric_mod * label.beta_plus_m_original()).trace();
  e.gap = r.ric_mod.norm() - std::abs(r.scal_mod) * label.beta_m.norm();
  e.equality_residual = (r.ric_mod + r.scal_mod * label.beta_m_original()).norm();
  return e;
}

enum class MetricClass { Flat, Soliton, Generic };

inline const char* to_string(MetricClass c) {
  switch (c) {
    case MetricClass::Flat: return "Flat";
    case MetricClass::Soliton: return "Soliton";
    default: return "Generic";
  }
}

struct Classification {
  MetricClass kind = MetricClass::Generic;
  // Soliton data: Ric~ = c Id_m + D|_m with D a derivation. At the
  // normalization |scal~| = 1 these reduce to c = -||beta_m||^2, D = b beta+.
  double c = 0.0;
  Matrix D;
  double soliton_residual = 0.0;
  double derivation_res = 0.0;
};

inline Classification classify(const Bracket& b, const StratumLabel& label, double tol = 1e-8,
                               const CurvatureOptions& opts = {}) {
  const CurvatureReport r = curvature_report(b, opts);
  Classification out;
  out.D = Matrix::Zero(b.n(), b.n());
  // Tolerances are taken relative to the curvature scale so the verdict is
  // stable under the quadratic rescaling mu -> a mu (Ric~ picks up a^2).
  const double scale = std::max(1.0, r.ric_mod.norm());
  if (r.ric_mod.norm() < tol * (1.0 + bracket_norm(b) * bracket_norm(b))) {
    out.kind = MetricClass::Flat;
    return out;
  }
  out.soliton_residual = (r.ric_mod + r.scal_mod * label.beta_m_original()).norm();
  if (out.soliton_residual < tol * scale) {
    out.c = r.scal_mod * label.beta_m.squaredNorm();
    out.D = (-r.scal_mod * label.b) * label.beta_plus_original();
    out.derivation_res = derivation_residual(out.D, b);
    // derivation_residual is bilinear in (D, mu), so normalize by both.
    const double deriv_tol =
        std::max(1e-6, 10.0 * tol) * (1.0 + out.D.norm()) * (1.0 + bracket_norm(b));
    out.kind = out.derivation_res <= deriv_tol ? MetricClass::Soliton : MetricClass::Generic;
    return out;
  }
  out.kind = MetricClass::Generic;
  return out;
}

}  // namespace bracketflow
