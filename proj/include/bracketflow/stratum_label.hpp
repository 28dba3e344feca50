#pragma once

// StratumLabel: the symmetric trace -1 matrix beta indexing a GIT stratum,
// together with the derived quantities used throughout the flow estimates:
//   beta_plus   = beta + ||beta||^2 Id
//   beta_m      = b * beta|_m   with b = (-tr_m beta|_m)^{-1}, so tr beta_m = -1
//   beta_m_plus = beta_m + ||beta_m||^2 Id_m  ( = b * beta_plus|_m )
// Labels produced by the stratification routines are diagonal, eigenvalues
// nondecreasing within each of the h- and m-blocks (the blocks are never
// mixed, since gauges must preserve the splitting); `vectors` holds the
// conjugation Q with beta_raw = Q * beta * Q^t in the original basis.

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"

namespace bracketflow {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct StratumLabel {
  int dim_h = 0;
  Matrix beta;         // N x N, diagonal in the label basis
  Matrix beta_plus;    // N x N
  Matrix beta_m;       // dim_m x dim_m
  Matrix beta_m_plus;  // dim_m x dim_m
  double b = 1.0;      // beta_m = b * beta|_m

  Vector eigenvalues;                  // ascending per block, clustered
  std::vector<int> multiplicities;    // cluster sizes, in order
  Matrix vectors;                      // conjugation into the original basis
  std::optional<std::vector<Rational>> rationalized;  // per cluster

  int n() const { return static_cast<int>(beta.rows()); }
  int dim_m() const { return n() - dim_h; }
  Matrix beta_plus_m() const {
    return beta_plus.bottomRightCorner(dim_m(), dim_m());
  }

  // Conjugates back into the basis the label was computed from. Pairings with
  // curvature tensors of the original bracket must use these, not the diagonal
  // label-basis forms (they differ whenever `vectors` is not a permutation).
  Matrix q_m() const { return vectors.bottomRightCorner(dim_m(), dim_m()); }
  Matrix beta_original() const { return vectors * beta * vectors.transpose(); }
  Matrix beta_plus_original() const { return vectors * beta_plus * vectors.transpose(); }
  Matrix beta_m_original() const { return q_m() * beta_m * q_m().transpose(); }
  Matrix beta_plus_m_original() const {
    return q_m() * beta_plus_m() * q_m().transpose();
  }
};

namespace detail {

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  while (b) {
    const std::int64_t r = a % b;
    a = b;
    b = r;
  }
  return a < 0 ? -a : a;
}

// Best rational p/q with q <= max_den approximating v (Stern-Brocot scan).
inline Rational best_rational(double v, std::int64_t max_den) {
  Rational best{0, 1};
  double err = std::abs(v);
  for (std::int64_t q = 1; q <= max_den; ++q) {
    const auto p = static_cast<std::int64_t>(std::llround(v * static_cast<double>(q)));
    const double e = std::abs(v - static_cast<double>(p) / static_cast<double>(q));
    if (e < err - 1e-18) {
      err = e;
      const std::int64_t g = std::max<std::int64_t>(gcd64(p, q), 1);
      best = {p / g, q / g};
    }
  }
  return best;
}

}  // namespace detail

// Clusters ascending eigenvalues with the given absolute gap threshold and
// replaces members by the cluster mean. Returns cluster sizes.
inline std::vector<int> cluster_eigenvalues(Vector& values, double gap = 1e-4) {
  std::vector<int> mult;
  const int n = static_cast<int>(values.size());
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || values(i) - values(i - 1) > gap) {
      double mean = 0.0;
      for (int j = start; j < i; ++j) mean += values(j);
      mean /= (i - start);
      for (int j = start; j < i; ++j) values(j) = mean;
      mult.push_back(i - start);
      start = i;
    }
  }
  return mult;
}

// Attempts small-denominator rationals for the clustered spectrum (one value
// per cluster, paired with the cluster sizes in mult) under the exact
// constraint sum(mult * p/q) = -1; returns nullopt if no consistent
// assignment within tol exists.
inline std::optional<std::vector<Rational>> rationalize_spectrum(
    const Vector& clustered, const std::vector<int>& mult, std::int64_t max_den = 60,
    double tol = 1e-4) {
  std::vector<Rational> out;
  for (size_t c = 0; c < mult.size(); ++c) {
    const double v = clustered(static_cast<int>(c));
    Rational r = detail::best_rational(v, max_den);
    if (std::abs(r.value() - v) > tol) return std::nullopt;
    out.push_back(r);
  }
  // Exact trace check: sum over clusters of mult * num/den == -1.
  std::int64_t lcm = 1;
  for (const auto& r : out) lcm = lcm / std::max<std::int64_t>(detail::gcd64(lcm, r.den), 1) * r.den;
  std::int64_t total = 0;
  for (size_t i = 0; i < out.size(); ++i) total += mult[i] * out[i].num * (lcm / out[i].den);
  if (total != -lcm) return std::nullopt;
  return out;
}

// Assembles a StratumLabel from a raw symmetric beta in the original basis.
// The h- and m-blocks are diagonalized separately so the label basis respects
// the splitting; eigenvalues are clustered and optionally rationalized.
inline StratumLabel make_stratum_label(const Matrix& beta_raw, int dim_h,
                                       bool rationalize = true, double cluster_gap = 1e-4) {
  const int n = static_cast<int>(beta_raw.rows());
  const int dim_m = n - dim_h;
  StratumLabel label;
  label.dim_h = dim_h;

  Vector values(n);
  Matrix q = Matrix::Zero(n, n);
  if (dim_h > 0) {
    const auto eh = symmetric_eigen(beta_raw.topLeftCorner(dim_h, dim_h));
    values.head(dim_h) = eh.values;
    q.topLeftCorner(dim_h, dim_h) = eh.vectors;
  }
  const auto em = symmetric_eigen(beta_raw.bottomRightCorner(dim_m, dim_m));
  values.tail(dim_m) = em.values;
  q.bottomRightCorner(dim_m, dim_m) = em.vectors;

  // Cluster per block so h/m eigenvalues are never averaged together.
  std::vector<int> mult;
  if (dim_h > 0) {
    Vector vh = values.head(dim_h);
    mult = cluster_eigenvalues(vh, cluster_gap);
    values.head(dim_h) = vh;
  }
  Vector vm = values.tail(dim_m);
  auto mm = cluster_eigenvalues(vm, cluster_gap);
  values.tail(dim_m) = vm;
  mult.insert(mult.end(), mm.begin(), mm.end());

  label.rationalized = std::nullopt;
  if (rationalize) {
    Vector cluster_values(static_cast<int>(mult.size()));
    int idx = 0;
    for (size_t c = 0; c < mult.size(); ++c) {
      cluster_values(static_cast<int>(c)) = values(idx);
      idx += mult[c];
    }
    auto rat = rationalize_spectrum(cluster_values, mult);
    if (rat) {
      int pos = 0;
      for (size_t c = 0; c < mult.size(); ++c) {
        for (int j = 0; j < mult[c]; ++j) values(pos + j) = (*rat)[c].value();
        pos += mult[c];
      }
      label.rationalized = rat;
    }
  }

  label.eigenvalues = values;
  label.multiplicities = mult;
  label.vectors = q;
  label.beta = values.asDiagonal();
  const double beta_sq = values.squaredNorm();
  label.beta_plus = label.beta + beta_sq * Matrix::Identity(n, n);

  const double tr_m = values.tail(dim_m).sum();
  if (tr_m >= -1e-12) throw FlatBracket("tr_m(beta|_m) >= 0, no beta_m normalization");
  label.b = -1.0 / tr_m;
  label.beta_m = label.b * Matrix(values.tail(dim_m).asDiagonal());
  label.beta_m_plus =
      label.beta_m + label.beta_m.squaredNorm() * Matrix::Identity(dim_m, dim_m);
  return label;
}

// Convenience: label from an already diagonal spectrum (catalog expectations).
inline StratumLabel label_from_diagonal(const Vector& diag, int dim_h,
                                        bool rationalize = true) {
  return make_stratum_label(Matrix(diag.asDiagonal()), dim_h, rationalize);
}

}  // namespace bracketflow
