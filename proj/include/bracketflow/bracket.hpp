#pragma once

// Tensor algebra on the space of brackets V(g) = Lambda^2(g*) (x) g.
// A Bracket stores structure constants c[i][j][k] = <mu(e_i,e_j), e_k> for an
// orthonormal basis of R^N = h (+) m, with e_1..e_{dim_h} spanning h.
// Dense storage; intended for N <= 12.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"

namespace bracketflow {

class Bracket {
 public:
  Bracket() = default;
  Bracket(int dim_h, int dim_m)
      : dim_h_(dim_h), dim_m_(dim_m), c_(static_cast<size_t>(n()) * n() * n(), 0.0) {
    if (dim_h < 0 || dim_m < 1) throw BadConfig("need dim_h >= 0 and dim_m >= 1");
  }

  int dim_h() const { return dim_h_; }
  int dim_m() const { return dim_m_; }
  int n() const { return dim_h_ + dim_m_; }

  // 0-based accessors.
  double at(int i, int j, int k) const { return c_[idx(i, j, k)]; }
  double& at(int i, int j, int k) { return c_[idx(i, j, k)]; }

  // Sets c[i][j][k] and the antisymmetric partner c[j][i][k].
  void set(int i, int j, int k, double value) {
    c_[idx(i, j, k)] = value;
    c_[idx(j, i, k)] = -value;
  }

  bool in_m(int i) const { return i >= dim_h_; }

  // mu(e_i, e_j) as a vector.
  Vector mu(int i, int j) const {
    Vector v(n());
    for (int k = 0; k < n(); ++k) v(k) = at(i, j, k);
    return v;
  }

  // mu(x, y) for arbitrary vectors.
  Vector mu(const Vector& x, const Vector& y) const {
    Vector v = Vector::Zero(n());
    for (int i = 0; i < n(); ++i) {
      if (x(i) == 0.0) continue;
      for (int j = 0; j < n(); ++j) {
        if (y(j) == 0.0) continue;
        const double w = x(i) * y(j);
        for (int k = 0; k < n(); ++k) v(k) += w * at(i, j, k);
      }
    }
    return v;
  }

  // Matrix of ad(e_i): column j holds mu(e_i, e_j).
  Matrix ad(int i) const {
    Matrix a(n(), n());
    for (int j = 0; j < n(); ++j)
      for (int k = 0; k < n(); ++k) a(k, j) = at(i, j, k);
    return a;
  }

  // ad(x) for an arbitrary vector.
  Matrix ad(const Vector& x) const {
    Matrix a = Matrix::Zero(n(), n());
    for (int i = 0; i < n(); ++i)
      if (x(i) != 0.0) a += x(i) * ad(i);
    return a;
  }

  const std::vector<double>& data() const { return c_; }
  std::vector<double>& data() { return c_; }

  double max_antisymmetry_violation() const {
    double worst = 0.0;
    for (int i = 0; i < n(); ++i)
      for (int j = 0; j <= i; ++j)
        for (int k = 0; k < n(); ++k)
          worst = std::max(worst, std::abs(at(i, j, k) + at(j, i, k)));
    return worst;
  }

  // Max |c[i][j][k]| over entries a homogeneous-space bracket must zero out:
  // mu(h,h) not in h, or mu(h,m) not in m.
  double splitting_violation() const {
    double worst = 0.0;
    for (int i = 0; i < dim_h_; ++i)
      for (int j = 0; j < n(); ++j)
        for (int k = 0; k < n(); ++k) {
          const bool bad = (j < dim_h_ && k >= dim_h_) || (j >= dim_h_ && k < dim_h_);
          if (bad) worst = std::max(worst, std::abs(at(i, j, k)));
        }
    return worst;
  }

  bool splitting_compatible(double tol = 0.0) const { return splitting_violation() <= tol; }

 private:
  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(i) * n() + j) * n() + k;
  }

  int dim_h_ = 0;
  int dim_m_ = 1;
  std::vector<double> c_ = std::vector<double>(1, 0.0);
};

struct BracketEntry {
  int i, j, k;  // 1-based, i < j expected (antisymmetrized on input)
  double value;
};

// Builds a bracket from 1-based sparse entries. With require_homogeneous the
// splitting constraints mu(h,h) <= h and mu(h,m) <= m are enforced.
inline Bracket make_bracket(int dim_h, int dim_m, const std::vector<BracketEntry>& entries,
                            bool require_homogeneous = false) {
  Bracket b(dim_h, dim_m);
  const int n = b.n();
  std::vector<char> seen(static_cast<size_t>(n) * n * n, 0);
  for (const auto& e : entries) {
    if (e.i < 1 || e.i > n || e.j < 1 || e.j > n || e.k < 1 || e.k > n)
      throw IndexOutOfRange("entry (" + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
                            std::to_string(e.k) + ") outside 1.." + std::to_string(n));
    const int i = e.i - 1, j = e.j - 1, k = e.k - 1;
    if (i == j) {
      if (e.value != 0.0) throw ConflictingEntry("mu(e_i,e_i) must vanish");
      continue;
    }
    const size_t slot = (static_cast<size_t>(std::min(i, j)) * n + std::max(i, j)) * n + k;
    const double signed_value = (i < j) ? e.value : -e.value;
    if (seen[slot] && b.at(std::min(i, j), std::max(i, j), k) != signed_value)
      throw ConflictingEntry("pair {" + std::to_string(e.i) + "," + std::to_string(e.j) +
                             "} -> " + std::to_string(e.k) + " assigned twice");
    seen[slot] = 1;
    b.set(std::min(i, j), std::max(i, j), k, signed_value);
  }
  if (require_homogeneous && !b.splitting_compatible())
    throw SplittingViolation("bracket violates mu(h,h) in h / mu(h,m) in m");
  return b;
}

// <mu, eta> summed over ordered pairs (i,j); ||mu||^2 counts each unordered
// pair twice.
inline double bracket_inner(const Bracket& a, const Bracket& b) {
  if (a.n() != b.n()) throw DimensionMismatch("brackets live on different dimensions");
  double s = 0.0;
  const auto& x = a.data();
  const auto& y = b.data();
  for (size_t t = 0; t < x.size(); ++t) s += x[t] * y[t];
  return s;
}

inline double bracket_norm(const Bracket& a) { return std::sqrt(bracket_inner(a, a)); }

// Frobenius norm of the Jacobi cyclic sum over all ordered basis triples.
inline double jacobi_residual(const Bracket& b) {
  const int n = b.n();
  double sq = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k) {
          double t = 0.0;
          for (int m = 0; m < n; ++m)
            t += b.at(i, j, m) * b.at(m, l, k) + b.at(j, l, m) * b.at(m, i, k) +
                 b.at(l, i, m) * b.at(m, j, k);
          sq += t * t;
        }
  return std::sqrt(sq);
}

// (h.mu)(x,y) = h mu(h^{-1}x, h^{-1}y).
inline Bracket act(const Matrix& h, const Bracket& b, double cond_limit = 1e12) {
  const int n = b.n();
  if (h.rows() != n || h.cols() != n) throw DimensionMismatch("gauge matrix size mismatch");
  if (condition_number(h) > cond_limit) throw SingularMatrix("gauge matrix ill-conditioned");
  const Matrix hinv = h.inverse();
  // Contract one index at a time: value index by h, argument indices by h^{-1}.
  Bracket t1(b.dim_h(), b.dim_m());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += h(k, l) * b.at(i, j, l);
        t1.at(i, j, k) = s;
      }
  Bracket t2(b.dim_h(), b.dim_m());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int bb = 0; bb < n; ++bb) s += hinv(bb, j) * t1.at(i, bb, k);
        t2.at(i, j, k) = s;
      }
  Bracket out(b.dim_h(), b.dim_m());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += hinv(a, i) * t2.at(a, j, k);
        out.at(i, j, k) = s;
      }
  return out;
}

// pi(A)mu = A mu(.,.) - mu(A., .) - mu(., A.), the derivative of act at Id.
inline Bracket pi_action(const Matrix& a, const Bracket& b) {
  const int n = b.n();
  if (a.rows() != n || a.cols() != n) throw DimensionMismatch("matrix size mismatch");
  Bracket out(b.dim_h(), b.dim_m());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += a(k, l) * b.at(i, j, l) - a(l, i) * b.at(l, j, k) - a(l, j) * b.at(i, l, k);
        out.at(i, j, k) = s;
      }
  return out;
}

// ||pi(A)mu||; zero iff A is a derivation of mu.
inline double derivation_residual(const Matrix& a, const Bracket& b) {
  return bracket_norm(pi_action(a, b));
}

// (c^{-1} Id_m).mu: componentwise factor c^{[i in m] + [j in m] - [k in m]}.
// Corresponds to the metric scaling g -> c^{-2} g; for dim_h = 0 this is the
// plain scalar multiple c*mu.
inline Bracket scale_bracket(double c, const Bracket& b) {
  if (!(c > 0.0)) throw NonpositiveScale("scale factor must be positive");
  Bracket out = b;
  const int n = b.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const int p = (b.in_m(i) ? 1 : 0) + (b.in_m(j) ? 1 : 0) - (b.in_m(k) ? 1 : 0);
        if (p != 0) out.at(i, j, k) = b.at(i, j, k) * std::pow(c, p);
      }
  return out;
}

// The four sub-tensors of a split bracket, stored full-size so that their sum
// reassembles the original tensor exactly.
struct SplitBracketParts {
  Bracket mu_h;  // m ^ m -> h
  Bracket mu_m;  // m ^ m -> m
  Bracket eta;   // (h x m) and (m x h) slots
  Bracket hh;    // h ^ h slots

  Bracket reassemble() const {
    Bracket out = mu_h;
    for (size_t t = 0; t < out.data().size(); ++t)
      out.data()[t] += mu_m.data()[t] + eta.data()[t] + hh.data()[t];
    return out;
  }
};

inline SplitBracketParts split_parts(const Bracket& b) {
  const int n = b.n();
  SplitBracketParts p{Bracket(b.dim_h(), b.dim_m()), Bracket(b.dim_h(), b.dim_m()),
                      Bracket(b.dim_h(), b.dim_m()), Bracket(b.dim_h(), b.dim_m())};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double v = b.at(i, j, k);
        if (v == 0.0) continue;
        if (!b.in_m(i) && !b.in_m(j)) p.hh.at(i, j, k) = v;
        else if (b.in_m(i) && b.in_m(j)) (b.in_m(k) ? p.mu_m : p.mu_h).at(i, j, k) = v;
        else p.eta.at(i, j, k) = v;
      }
  return p;
}

inline double norm_mu_m(const Bracket& b) { return bracket_norm(split_parts(b).mu_m); }
inline double norm_mu_h(const Bracket& b) { return bracket_norm(split_parts(b).mu_h); }

struct Subspace {
  Matrix basis;  // N x dim, orthonormal columns
  int dim() const { return static_cast<int>(basis.cols()); }
};

struct NilradicalSplit {
  Subspace n;  // nilradical
  Subspace a;  // orthogonal complement n^perp
};

namespace detail {

inline Matrix killing_matrix(const Bracket& b) {
  const int n = b.n();
  std::vector<Matrix> ads;
  ads.reserve(n);
  for (int i = 0; i < n; ++i) ads.push_back(b.ad(i));
  Matrix k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      k(i, j) = (ads[i] * ads[j]).trace();
      k(j, i) = k(i, j);
    }
  return k;
}

inline bool power_nilpotent(const Matrix& a, double tol = 1e-8) {
  const double norm = a.norm();
  if (norm == 0.0) return true;
  Matrix m = a / norm;
  Matrix p = m;
  for (int k = 1; k < a.rows(); ++k) p = p * m;
  return p.norm() < tol;
}

}  // namespace detail

// Nilradical n of (g, mu) plus its orthogonal complement a = n^perp.
//
// Radical via Cartan's criterion: r = [g,g]^perp w.r.t. the Killing form.
// Inside r, nilpotency of ad x is cut out by the linear conditions
// tr(ad x (ad y)^k) = 0, k = 0..N-1, for generic y in r: ad(r) is solvable,
// hence simultaneously triangularizable over C, so these traces equal
// sum_j lambda_j(x) lambda_j(y)^k with the eigenvalue functionals lambda_j
// linear on r. The result is verified by power tests and ideal closure.
inline NilradicalSplit nilradical(const Bracket& b, double jacobi_tol = 1e-8) {
  const int n = b.n();
  if (jacobi_residual(b) > jacobi_tol * (1.0 + bracket_inner(b, b)))
    throw NotALieBracket("jacobi residual above tolerance");

  // Derived algebra.
  Matrix prods(n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) prods.col(i * n + j) = b.mu(i, j);
  const Matrix derived = column_span(prods);

  // Radical r = {x : K(x, [g,g]) = 0}.
  const Matrix kf = detail::killing_matrix(b);
  Matrix r_basis;
  if (derived.cols() == 0) {
    r_basis = Matrix::Identity(n, n);  // abelian
  } else {
    r_basis = null_space(Matrix(derived.transpose() * kf));
  }

  Matrix n_basis(n, 0);
  if (r_basis.cols() > 0) {
    const int dim_r = static_cast<int>(r_basis.cols());
    std::mt19937_64 rng(0x5eed5eedULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    bool verified = false;
    for (int attempt = 0; attempt < 5 && !verified; ++attempt) {
      std::vector<Matrix> rows;
      for (int draw = 0; draw < 3; ++draw) {
        Vector yc(dim_r);
        for (int i = 0; i < dim_r; ++i) yc(i) = gauss(rng);
        const Matrix ad_y = b.ad(Vector(r_basis * yc));
        const double scale = std::max(1.0, ad_y.norm());
        Matrix pw = Matrix::Identity(n, n);
        for (int k = 0; k < n; ++k) {
          Matrix row(1, dim_r);
          for (int j = 0; j < dim_r; ++j)
            row(0, j) = (b.ad(Vector(r_basis.col(j))) * pw).trace();
          rows.push_back(row);
          pw = pw * (ad_y / scale);
        }
      }
      Matrix cond(rows.size(), dim_r);
      for (size_t i = 0; i < rows.size(); ++i) cond.row(i) = rows[i];
      const Matrix kernel = null_space(cond);
      Matrix candidate = r_basis * kernel;

      // Verification: power nilpotency of basis and random combinations,
      // plus ideal closure mu(g, n) within span(n).
      verified = true;
      const int dim_n = static_cast<int>(candidate.cols());
      for (int j = 0; j < dim_n && verified; ++j)
        verified = detail::power_nilpotent(b.ad(Vector(candidate.col(j))));
      for (int draw = 0; draw < 3 && verified && dim_n > 0; ++draw) {
        Vector w(dim_n);
        for (int i = 0; i < dim_n; ++i) w(i) = gauss(rng);
        w.normalize();
        verified = detail::power_nilpotent(b.ad(Vector(candidate * w)));
      }
      if (verified && dim_n > 0) {
        const Matrix proj = candidate * candidate.transpose();
        for (int i = 0; i < n && verified; ++i)
          for (int j = 0; j < dim_n && verified; ++j) {
            const Vector v = b.mu(Vector(Vector::Unit(n, i)), Vector(candidate.col(j)));
            verified = (v - proj * v).norm() <= 1e-10 * (1.0 + bracket_norm(b));
          }
      }
      if (verified) n_basis = candidate;
    }
    if (!verified) throw Error("nilradical verification failed");
  }

  NilradicalSplit out;
  out.n.basis = n_basis;
  out.a.basis = orthogonal_complement(n_basis, n);
  return out;
}

}  // namespace bracketflow
