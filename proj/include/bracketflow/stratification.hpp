#pragma once

// Geometric-invariant-theory layer: energy of the moment map and its negative
// gradient flow, stratum labels, the beta-subgroup decompositions, spectral
// projections, and gauging into the nonnegative part V^{>=0} of pi(beta+).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "bracketflow/bracket.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"
#include "bracketflow/stratum_label.hpp"

namespace bracketflow {

// ||m(mu)||^2.
inline double energy(const Bracket& b) { return moment_map(b).squaredNorm(); }

// Gradient of ||m(.)||^2 restricted to the unit sphere, evaluated at mu/||mu||.
// From the duality <m(mu), A> ||mu||^2 = <pi(A)mu, mu>, differentiating at unit
// norm gives grad E = 4 (pi(m(mu)) mu - E mu); this is tangent to the sphere
// since <pi(m)mu, mu> = E ||mu||^2. Validated against finite differences in
// the test suite before first use.
inline Bracket energy_gradient(const Bracket& b) {
  const double norm = bracket_norm(b);
  if (norm <= 0.0) throw ZeroBracket("energy gradient undefined at mu = 0");
  Bracket unit = b;
  for (auto& v : unit.data()) v /= norm;
  const Matrix m = moment_map(unit);
  const double e = m.squaredNorm();
  Bracket g = pi_action(m, unit);
  for (size_t t = 0; t < g.data().size(); ++t)
    g.data()[t] = 4.0 * (g.data()[t] - e * unit.data()[t]);
  return g;
}

struct StratumOptions {
  double grad_tol = 1e-10;
  long max_iter = 1000000;
  bool rationalize = true;
  double cluster_gap = 1e-4;
  double flat_tol = 1e-8;      // FlatBracket when tr_m(beta|_m) >= -flat_tol
  double initial_step = 0.05;
  double max_step = 0.25;
};

namespace detail {

inline void renormalize(Bracket& b) {
  const double n = bracket_norm(b);
  for (auto& v : b.data()) v /= n;
}

}  // namespace detail

// Runs the normalized negative gradient flow of the energy from mu/||mu||
// (explicit Euler, adaptive step, renormalizing each step) and returns the
// stratum label beta = m(limit), diagonalized with nondecreasing eigenvalues
// per splitting block.
inline StratumLabel stratum_label(const Bracket& b, const StratumOptions& opts = {}) {
  const double bn = bracket_norm(b);
  if (bn <= 0.0) throw FlatBracket("zero bracket carries no stratum label");
  {
    // Flat metrics (Ric = 0) carry no meaningful label; reject them up front.
    // The Ricci norm scales like ||mu||^2, so the test is scale invariant.
    CurvatureOptions copts;
    copts.check_jacobi = false;
    const CurvatureReport rep = curvature_report(b, copts);
    if (rep.ric.norm() <= opts.flat_tol * bn * bn)
      throw FlatBracket("flat bracket carries no stratum label");
  }
  Bracket x = b;
  detail::renormalize(x);
  double e = energy(x);
  Bracket g = energy_gradient(x);
  double gn = bracket_norm(g);
  double step = opts.initial_step;
  // Once the iterate sits at the floating-point floor of the energy, an
  // energy-based acceptance test goes blind: an overshooting mode can grow by
  // less than the roundoff slack per step and the iteration limit-cycles with
  // ||grad|| stuck near sqrt(eps). Below this threshold acceptance switches to
  // monotone decrease of ||grad|| itself, which stays resolvable down to eps.
  const double basin_gn = 1e-5;
  bool converged = false;
  for (long iter = 0; iter < opts.max_iter; ++iter) {
    if (gn < opts.grad_tol) {
      converged = true;
      break;
    }
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, e);
    const bool polish = gn < basin_gn;
    bool accepted = false;
    while (step > 1e-18) {
      Bracket cand = x;
      for (size_t t = 0; t < cand.data().size(); ++t) cand.data()[t] -= step * g.data()[t];
      detail::renormalize(cand);
      const double ec = energy(cand);
      if (polish) {
        Bracket gc = energy_gradient(cand);
        const double gnc = bracket_norm(gc);
        if (gnc < gn) {
          x = std::move(cand);
          e = ec;
          g = std::move(gc);
          gn = gnc;
          step = std::min(step * 1.25, opts.max_step);
          accepted = true;
          break;
        }
      } else if (ec <= e + slack) {
        x = std::move(cand);
        e = ec;
        g = energy_gradient(x);
        gn = bracket_norm(g);
        step = std::min(step * 1.25, opts.max_step);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step floored at roundoff; treat as converged state
  }
  if (!converged && gn >= opts.grad_tol)
    throw NoConvergence("gradient norm " + std::to_string(gn) + " after " +
                        std::to_string(opts.max_iter) + " iterations");

  const Matrix beta_raw = moment_map(x);
  const int dm = b.dim_m();
  if (beta_raw.bottomRightCorner(dm, dm).trace() >= -opts.flat_tol)
    throw FlatBracket("tr_m(beta|_m) >= 0 at the gradient-flow limit");
  return make_stratum_label(beta_raw, b.dim_h(), opts.rationalize, opts.cluster_gap);
}

// Appendix-style direct label: n = nilradical, nu = mu restricted to n.
// If nu = 0:  beta = a^{-1} diag(-Id_a, 0)  with a = dim n^perp;
// else        beta = b diag(-||beta_n||^2 Id_a, beta_n),  b = (1+a||beta_n||^2)^{-1},
// where beta_n is the gradient-flow label of nu on V(n).
inline StratumLabel beta_from_nilradical(const Bracket& b, const StratumOptions& opts = {}) {
  if (bracket_norm(b) <= 0.0) throw ZeroBracket("no label for the zero bracket");
  const NilradicalSplit ns = nilradical(b);
  const int n = b.n();
  const int dim_n = ns.n.dim();
  const int dim_a = n - dim_n;

  // Gauges must preserve h (+) m, so the nilradical must sit inside m.
  if (b.dim_h() > 0 && dim_n > 0 &&
      ns.n.basis.topRows(b.dim_h()).norm() > 1e-10)
    throw Error("nilradical not contained in m; outside the implemented cases");

  Matrix v(n, n);        // orthonormal columns: a-basis then n-basis
  Vector values(n);      // matching beta eigenvalues
  if (dim_a > 0) v.leftCols(dim_a) = ns.a.basis;

  double nu_norm = 0.0;
  Bracket nu(0, std::max(dim_n, 1));
  if (dim_n > 0) {
    nu = Bracket(0, dim_n);
    for (int i = 0; i < dim_n; ++i)
      for (int j = 0; j < dim_n; ++j) {
        const Vector w = b.mu(Vector(ns.n.basis.col(i)), Vector(ns.n.basis.col(j)));
        for (int k = 0; k < dim_n; ++k) nu.at(i, j, k) = ns.n.basis.col(k).dot(w);
      }
    nu_norm = bracket_norm(nu);
  }

  if (nu_norm <= 1e-12) {
    if (dim_a == 0) throw ZeroBracket("nilpotent bracket with zero restriction");
    values.head(dim_a).setConstant(-1.0 / dim_a);
    values.tail(dim_n).setZero();
    if (dim_n > 0) v.rightCols(dim_n) = ns.n.basis;
  } else {
    const StratumLabel ln = stratum_label(nu, opts);
    const double bn_sq = ln.beta.squaredNorm();
    const double scale = 1.0 / (1.0 + dim_a * bn_sq);
    values.head(dim_a).setConstant(-scale * bn_sq);
    for (int i = 0; i < dim_n; ++i) values(dim_a + i) = scale * ln.eigenvalues(i);
    v.rightCols(dim_n) = ns.n.basis * ln.vectors;
  }

  const Matrix beta_raw = v * values.asDiagonal() * v.transpose();
  StratumOptions label_opts = opts;
  return make_stratum_label(beta_raw, b.dim_h(), label_opts.rationalize, label_opts.cluster_gap);
}

// Bases of the subgroup algebras attached to a diagonal label, as matrices on
// m (for dim_h = 0 this is all of gl(g)):
//   g_beta: [A, beta] = 0 (block diagonal over eigenvalue clusters)
//   u_beta: positive ad(beta)-eigenspaces (strictly lower blocks)
//   q_beta: g_beta (+) u_beta
//   h_beta: A in g_beta with <A, beta> = 0
//   k:      orthogonal complement of so & q_beta inside so(m)
// With isotropy generators (columns of ad(h)|_m from a reference bracket),
// every basis is intersected with their commutant.
struct BetaGroups {
  int dim_m = 0;
  std::vector<Matrix> g_beta, u_beta, q_beta, h_beta, k_complement;
};

namespace detail {

// Cluster id per m-index from the label's m-block eigenvalues.
inline std::vector<int> m_cluster_ids(const StratumLabel& label) {
  const int dm = label.dim_m();
  const Vector vm = label.eigenvalues.tail(dm);
  std::vector<int> id(dm, 0);
  for (int i = 1; i < dm; ++i)
    id[i] = (vm(i) - vm(i - 1) > 1e-12) ? id[i - 1] + 1 : id[i - 1];
  return id;
}

// Orthonormal basis (as matrices) of the subspace of span(cands) commuting
// with every matrix in cons.
inline std::vector<Matrix> intersect_commutant(const std::vector<Matrix>& cands,
                                               const std::vector<Matrix>& cons) {
  if (cons.empty() || cands.empty()) return cands;
  const int d = static_cast<int>(cands[0].rows());
  Matrix rows(static_cast<int>(cons.size()) * d * d, static_cast<int>(cands.size()));
  for (size_t c = 0; c < cands.size(); ++c) {
    int r = 0;
    for (const auto& z : cons) {
      const Matrix comm = cands[c] * z - z * cands[c];
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) rows(r++, static_cast<int>(c)) = comm(i, j);
    }
  }
  const Matrix kernel = null_space(rows);
  std::vector<Matrix> out;
  for (int c = 0; c < kernel.cols(); ++c) {
    Matrix a = Matrix::Zero(d, d);
    for (size_t i = 0; i < cands.size(); ++i) a += kernel(static_cast<int>(i), c) * cands[i];
    out.push_back(a / a.norm());
  }
  return out;
}

}  // namespace detail

inline BetaGroups beta_groups(const StratumLabel& label,
                              const std::vector<Matrix>& isotropy_on_m = {}) {
  const int dm = label.dim_m();
  const auto id = detail::m_cluster_ids(label);
  const Vector vm = label.eigenvalues.tail(dm);
  BetaGroups g;
  g.dim_m = dm;

  auto unit = [dm](int i, int j) {
    Matrix e = Matrix::Zero(dm, dm);
    e(i, j) = 1.0;
    return e;
  };

  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) {
      if (id[i] == id[j]) {
        if (i != j) g.g_beta.push_back(unit(i, j));
      } else if (vm(i) > vm(j)) {
        g.u_beta.push_back(unit(i, j));
      }
    }
  for (int i = 0; i < dm; ++i) g.g_beta.push_back(unit(i, i));

  // h_beta: off-diagonal part of g_beta plus trace-free-against-beta diagonals.
  for (const auto& a : g.g_beta)
    if (std::abs((a.transpose() * label.beta_m).trace()) < 1e-14) g.h_beta.push_back(a);
  {
    Matrix diag_dirs = null_space(Matrix(vm.transpose()));
    for (int c = 0; c < diag_dirs.cols(); ++c) {
      Matrix a = Matrix::Zero(dm, dm);
      for (int i = 0; i < dm; ++i) a(i, i) = diag_dirs(i, c);
      g.h_beta.push_back(a);
    }
  }

  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < i; ++j)
      if (id[i] != id[j]) g.k_complement.push_back((unit(i, j) - unit(j, i)) / std::sqrt(2.0));

  g.q_beta = g.g_beta;
  g.q_beta.insert(g.q_beta.end(), g.u_beta.begin(), g.u_beta.end());

  if (!isotropy_on_m.empty()) {
    g.g_beta = detail::intersect_commutant(g.g_beta, isotropy_on_m);
    g.u_beta = detail::intersect_commutant(g.u_beta, isotropy_on_m);
    g.q_beta = detail::intersect_commutant(g.q_beta, isotropy_on_m);
    g.h_beta = detail::intersect_commutant(g.h_beta, isotropy_on_m);
    g.k_complement = detail::intersect_commutant(g.k_complement, isotropy_on_m);
  }
  return g;
}

// Isotropy generators ad(e_z)|_m of a homogeneous-space bracket.
inline std::vector<Matrix> isotropy_generators(const Bracket& b) {
  std::vector<Matrix> gens;
  const int dh = b.dim_h(), dm = b.dim_m();
  for (int z = 0; z < dh; ++z) {
    Matrix a(dm, dm);
    for (int j = 0; j < dm; ++j)
      for (int k = 0; k < dm; ++k) a(k, j) = b.at(z, dh + j, dh + k);
    gens.push_back(a);
  }
  return gens;
}

// Decomposes A = A_k + A_q with A_k in k, A_q in q_beta, returning A_k.
inline Matrix x_q_projection(const Matrix& a, const BetaGroups& groups) {
  const int dm = groups.dim_m;
  if (a.rows() != dm || a.cols() != dm) throw DimensionMismatch("matrix must act on m");
  const size_t nk = groups.k_complement.size(), nq = groups.q_beta.size();
  Matrix system(dm * dm, static_cast<int>(nk + nq));
  auto fill = [&](size_t col, const Matrix& m) {
    for (int i = 0; i < dm; ++i)
      for (int j = 0; j < dm; ++j) system(i * dm + j, static_cast<int>(col)) = m(i, j);
  };
  for (size_t c = 0; c < nk; ++c) fill(c, groups.k_complement[c]);
  for (size_t c = 0; c < nq; ++c) fill(nk + c, groups.q_beta[c]);
  Vector rhs(dm * dm);
  for (int i = 0; i < dm; ++i)
    for (int j = 0; j < dm; ++j) rhs(i * dm + j) = a(i, j);
  const Vector sol = system.colPivHouseholderQr().solve(rhs);
  if ((system * sol - rhs).norm() > 1e-8 * std::max(1.0, a.norm()))
    throw DecompositionSingular("gl(m) != k (+) q_beta for this label");
  Matrix a_k = Matrix::Zero(dm, dm);
  for (size_t c = 0; c < nk; ++c) a_k += sol(static_cast<int>(c)) * groups.k_complement[c];
  return a_k;
}

// --- eigencomponent machinery for pi(beta+) ------------------------------

// Brackets are moved to the label basis with act(Q^t, .), where Q is the
// label's conjugation; there pi(beta+) is diagonal with coordinate eigenvalue
// r(i,j,k) = bp_k - bp_i - bp_j on c[i][j][k].
inline Bracket to_label_basis(const Bracket& b, const StratumLabel& label) {
  return act(Matrix(label.vectors.transpose()), b);
}

inline Bracket from_label_basis(const Bracket& b, const StratumLabel& label) {
  return act(label.vectors, b);
}

// Sum of squared coordinates with eigenvalue below -zero_band, over ||mu||^2.
inline double negative_component_mass(const Bracket& b, const StratumLabel& label,
                                      double zero_band = 1e-8) {
  const Bracket lb = to_label_basis(b, label);
  const int n = lb.n();
  const Vector bp = label.beta_plus.diagonal();
  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double r = bp(k) - bp(i) - bp(j);
        if (r < -zero_band) mass += lb.at(i, j, k) * lb.at(i, j, k);
      }
  const double sq = bracket_inner(b, b);
  return sq > 0.0 ? mass / sq : 0.0;
}

// Eigencomponent norms ||mu_r||^2 grouped by eigenvalue r (for the estimate
// <m(mu), beta+> = sum_r r ||mu_r||^2 / ||mu||^2).
inline std::vector<std::pair<double, double>> eigencomponent_masses(
    const Bracket& b, const StratumLabel& label, double band = 1e-8) {
  const Bracket lb = to_label_basis(b, label);
  const int n = lb.n();
  const Vector bp = label.beta_plus.diagonal();
  std::vector<std::pair<double, double>> groups;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double v = lb.at(i, j, k);
        if (v == 0.0) continue;
        const double r = bp(k) - bp(i) - bp(j);
        bool found = false;
        for (auto& g : groups)
          if (std::abs(g.first - r) <= band) {
            g.second += v * v;
            found = true;
            break;
          }
        if (!found) groups.emplace_back(r, v * v);
      }
    return groups;
}

// Spectral projection onto the zero eigenspace of pi(beta+). Agrees with
// lim_{t->oo} exp(-t beta+) . mu (checked in tests via exp_beta_plus_action).
inline Bracket project_p_beta(const Bracket& b, const StratumLabel& label,
                              double zero_band = 1e-8, double mass_tol = 1e-8) {
  if (negative_component_mass(b, label, zero_band) > mass_tol)
    throw NegativeComponent("mu has negative eigencomponents; gauge first");
  Bracket lb = to_label_basis(b, label);
  const int n = lb.n();
  const Vector bp = label.beta_plus.diagonal();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (std::abs(bp(k) - bp(i) - bp(j)) > zero_band) lb.at(i, j, k) = 0.0;
  return from_label_basis(lb, label);
}

// exp(-t beta+) . mu in the original basis (no conditioning guard: the flow
// to the projection is the whole point here).
inline Bracket exp_beta_plus_action(const Bracket& b, const StratumLabel& label, double t) {
  const Vector bp = label.beta_plus.diagonal();
  Matrix e = Matrix::Zero(b.n(), b.n());
  for (int i = 0; i < b.n(); ++i) e(i, i) = std::exp(-t * bp(i));
  const Bracket lb = to_label_basis(b, label);
  return from_label_basis(act(e, lb, std::numeric_limits<double>::infinity()), label);
}

// --- gauging into V^{>=0} --------------------------------------------------

struct GaugeOptions {
  double mass_tol = 1e-10;   // success threshold on relative negative mass
  int restarts = 50;         // random restarts of the local orthogonal search
  std::uint64_t seed = 12345;
};

struct GaugeResult {
  Matrix k;        // orthogonal, splitting-preserving
  Bracket gauged;  // k . mu
  double negative_mass = 0.0;
};

namespace detail {

inline Matrix exp_skew_on_m(const Vector& theta, int dim_h, int dim_m) {
  Matrix s = Matrix::Zero(dim_m, dim_m);
  int t = 0;
  for (int i = 0; i < dim_m; ++i)
    for (int j = 0; j < i; ++j) {
      s(i, j) = theta(t);
      s(j, i) = -theta(t);
      ++t;
    }
  // exp via truncated series; for the small angles used here 12 terms are
  // ample, and the QR pass below absorbs the truncation error.
  Matrix e = Matrix::Identity(dim_m, dim_m);
  Matrix term = Matrix::Identity(dim_m, dim_m);
  for (int k = 1; k <= 12; ++k) {
    term = term * s / static_cast<double>(k);
    e += term;
  }
  // Re-orthogonalize to kill series truncation.
  Eigen::HouseholderQR<Matrix> qr(e);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim_m; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  Matrix full = Matrix::Identity(dim_h + dim_m, dim_h + dim_m);
  full.bottomRightCorner(dim_m, dim_m) = q;
  return full;
}

}  // namespace detail

// Finds an orthogonal, splitting-preserving k with pi(beta+) (k.mu) free of
// negative eigencomponents. Constructive route: align the nilradical with
// Im(beta+); remaining freedom resolved by permutation search over eigenvalue
// slots and, failing that, a seeded local search minimizing negative mass.
inline GaugeResult gauge_to_Vnn(const Bracket& b, const StratumLabel& label,
                                const GaugeOptions& opts = {}) {
  const int n = b.n(), dh = b.dim_h(), dm = b.dim_m();
  GaugeResult best{Matrix::Identity(n, n), b, negative_component_mass(b, label)};
  if (best.negative_mass <= opts.mass_tol) return best;

  const Vector bp = label.beta_plus.diagonal();
  auto mass_of = [&](const Matrix& k) {
    return negative_component_mass(act(k, b), label);
  };
  auto consider = [&](const Matrix& k) {
    const double m = mass_of(k);
    if (m < best.negative_mass) {
      best.negative_mass = m;
      best.k = k;
    }
  };

  // Step 1: nilradical alignment (only meaningful when beta+ has a kernel
  // slot structure to match).
  Matrix k1 = Matrix::Identity(n, n);
  try {
    const NilradicalSplit ns = nilradical(b);
    const int dim_n = ns.n.dim();
    int positive_slots = 0;
    for (int i = dh; i < n; ++i)
      if (bp(i) > 1e-10) ++positive_slots;
    const bool n_in_m = dh == 0 || dim_n == 0 || ns.n.basis.topRows(dh).norm() < 1e-10;
    if (dim_n == positive_slots && n_in_m) {
      Matrix n_m(dm, dim_n);
      for (int c = 0; c < dim_n; ++c) n_m.col(c) = ns.n.basis.col(c).tail(dm);
      const Matrix n_on = column_span(n_m);
      if (n_on.cols() == dim_n) {
        const Matrix a_on = orthogonal_complement(n_on, dm);
        Matrix c_m(dm, dm);
        c_m.leftCols(a_on.cols()) = a_on;
        c_m.rightCols(dim_n) = n_on;
        // Compose with the label conjugation so the slots being targeted are
        // the label-basis ones whatever frame the bracket arrived in.
        k1 = Matrix::Identity(n, n);
        k1.bottomRightCorner(dm, dm) = c_m.transpose();
        k1 = label.vectors * k1;
        consider(k1);
      }
    }
  } catch (const Error&) {
    // brackets off the Lie variety: fall through to the search phases
  }
  if (best.negative_mass <= opts.mass_tol) {
    best.gauged = act(best.k, b);
    return best;
  }

  // Step 2: permutation search over m-coordinate slots, deduplicated by the
  // beta+ value signature (permutations within an eigenvalue cluster act
  // trivially on the eigencomponent masses).
  {
    std::vector<int> perm(dm);
    for (int i = 0; i < dm; ++i) perm[i] = i;
    std::vector<std::vector<double>> seen;
    const Matrix base = best.k;
    do {
      std::vector<double> signature(dm);
      for (int i = 0; i < dm; ++i) signature[perm[i]] = bp(dh + i);
      bool dup = false;
      for (const auto& s : seen)
        if (s == signature) {
          dup = true;
          break;
        }
      if (dup) continue;
      seen.push_back(signature);
      Matrix p = Matrix::Identity(n, n);
      p.bottomRightCorner(dm, dm).setZero();
      for (int i = 0; i < dm; ++i) p(dh + i, dh + perm[i]) = 1.0;
      // Permute label-basis slots: conjugate the slot permutation through Q.
      consider(label.vectors * p * label.vectors.transpose() * base);
      if (best.negative_mass <= opts.mass_tol) break;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  if (best.negative_mass <= opts.mass_tol) {
    best.gauged = act(best.k, b);
    return best;
  }

  // Step 3: seeded local search on O(m) around the best candidate.
  const int np = dm * (dm - 1) / 2;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix anchor = best.k;
  for (int restart = 0; restart < opts.restarts && best.negative_mass > opts.mass_tol;
       ++restart) {
    Vector theta = Vector::Zero(np);
    if (restart > 0)
      for (int i = 0; i < np; ++i) theta(i) = 0.6 * gauss(rng);
    Matrix frame = (restart % 2 == 0) ? anchor : best.k;
    double current = mass_of(detail::exp_skew_on_m(theta, dh, dm) * frame);
    double delta = 0.3;
    while (delta > 1e-7) {
      bool improved = false;
      for (int i = 0; i < np; ++i)
        for (double sgn : {1.0, -1.0}) {
          Vector cand = theta;
          cand(i) += sgn * delta;
          const double m = mass_of(detail::exp_skew_on_m(cand, dh, dm) * frame);
          if (m < current - 1e-16) {
            current = m;
            theta = cand;
            improved = true;
          }
        }
      if (!improved) delta *= 0.5;
    }
    consider(detail::exp_skew_on_m(theta, dh, dm) * frame);
  }

  if (best.negative_mass > opts.mass_tol)
    throw GaugeFailed("negative mass " + std::to_string(best.negative_mass) +
                      " not reducible below tolerance");
  best.gauged = act(best.k, b);
  return best;
}

// Diagnostic semistability probe: bounded norm minimization of p_beta(mu)
// over exp(h_beta) directions. A positive floor is evidence (not proof) of
// semistability.
inline double semistability_probe(const Bracket& b, const StratumLabel& label,
                                  int iterations = 300) {
  // Work in the label basis throughout: the h_beta directions live there.
  const Bracket p = to_label_basis(project_p_beta(b, label), label);
  const BetaGroups groups = beta_groups(label);
  const size_t nd = groups.h_beta.size();
  Vector coef = Vector::Zero(static_cast<int>(nd));
  auto norm_at = [&](const Vector& c) {
    Matrix a = Matrix::Zero(b.n(), b.n());
    for (size_t i = 0; i < nd; ++i) {
      Matrix full = Matrix::Zero(b.n(), b.n());
      full.bottomRightCorner(groups.dim_m, groups.dim_m) = groups.h_beta[i];
      a += c(static_cast<int>(i)) * full;
    }
    // exp via the series (h_beta directions are small here)
    Matrix e = Matrix::Identity(b.n(), b.n());
    Matrix term = e;
    for (int k = 1; k <= 14; ++k) {
      term = term * a / static_cast<double>(k);
      e += term;
    }
    return bracket_norm(act(e, p, std::numeric_limits<double>::infinity()));
  };
  double current = norm_at(coef);
  double delta = 0.25;
  int evals = 0;
  while (delta > 1e-4 && evals < iterations) {
    bool improved = false;
    for (size_t i = 0; i < nd && evals < iterations; ++i)
      for (double sgn : {1.0, -1.0}) {
        Vector cand = coef;
        cand(static_cast<int>(i)) += sgn * delta;
        const double v = norm_at(cand);
        ++evals;
        if (v < current - 1e-14) {
          current = v;
          coef = cand;
          improved = true;
        }
      }
    if (!improved) delta *= 0.5;
  }
  return current;
}

}  // namespace bracketflow
