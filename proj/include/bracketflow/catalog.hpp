#pragma once

// Built-in Lie algebras and homogeneous-space presentations with reference
// values. The expected blocks are fixtures: every test re-derives them
// through the library rather than trusting the stored numbers.

#include <optional>
#include <string>
#include <vector>

#include "bracketflow/bracket.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/linalg.hpp"

namespace bracketflow {

struct CatalogExpected {
  std::optional<Vector> beta_diagonal;  // ascending label spectrum (h block first)
  std::optional<Matrix> ric_mod;        // at the standard metric
  std::optional<double> scal_mod;
  std::optional<MetricClass> classification;
  std::string notes;
};

struct CatalogEntry {
  std::string name;
  int dim_h = 0;
  int dim_m = 0;
  std::vector<BracketEntry> entries;
  CatalogExpected expected;
  std::vector<std::string> tags;

  Bracket bracket() const { return make_bracket(dim_h, dim_m, entries, dim_h > 0); }
  bool has_tag(const std::string& t) const {
    for (const auto& tag : tags)
      if (tag == t) return true;
    return false;
  }
};

namespace detail {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Matrix diag(std::initializer_list<double> v) {
  Matrix out = Matrix::Zero(static_cast<int>(v.size()), static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) {
    out(i, i) = x;
    ++i;
  }
  return out;
}

inline std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> c;

  for (int n = 1; n <= 4; ++n) {
    CatalogEntry e;
    e.name = "abelian(" + std::to_string(n) + ")";
    e.dim_m = n;
    e.expected.ric_mod = Matrix::Zero(n, n);
    e.expected.scal_mod = 0.0;
    e.expected.classification = MetricClass::Flat;
    e.expected.notes = "abelian; flat; no stratum label";
    e.tags = {"nilpotent", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "heis3";
    e.dim_m = 3;
    e.entries = {{1, 2, 3, 1.0}};
    e.expected.beta_diagonal = vec({-1, -1, 1});
    e.expected.ric_mod = diag({-0.5, -0.5, 0.5});
    e.expected.scal_mod = -0.5;
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "Heisenberg nilsoliton";
    e.tags = {"nilpotent", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "heis5";
    e.dim_m = 5;
    e.entries = {{1, 2, 5, 1.0}, {3, 4, 5, 1.0}};
    e.expected.beta_diagonal = vec({-0.5, -0.5, -0.5, -0.5, 1});
    e.expected.ric_mod = diag({-0.5, -0.5, -0.5, -0.5, 1.0});
    e.expected.scal_mod = -1.0;
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "5-dimensional Heisenberg nilsoliton";
    e.tags = {"nilpotent", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "su2";
    e.dim_m = 3;
    e.entries = {{1, 2, 3, 1.0}, {2, 3, 1, 1.0}, {1, 3, 2, -1.0}};
    e.expected.beta_diagonal = vec({-1.0 / 3, -1.0 / 3, -1.0 / 3});
    e.expected.ric_mod = diag({0.5, 0.5, 0.5});
    e.expected.scal_mod = 1.5;
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "round metric; Einstein shrinker, finite-time extinction";
    e.tags = {"semisimple", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "sl2r";
    e.dim_m = 3;
    e.entries = {{1, 2, 2, 2.0}, {1, 3, 3, -2.0}, {2, 3, 1, 1.0}};
    e.expected.beta_diagonal = vec({-1.0 / 3, -1.0 / 3, -1.0 / 3});
    Matrix ric = Matrix::Zero(3, 3);
    ric(0, 0) = -7.5;
    ric(1, 1) = -0.5;
    ric(2, 2) = -0.5;
    ric(1, 2) = ric(2, 1) = -2.0;
    e.expected.ric_mod = ric;
    e.expected.scal_mod = -8.5;
    e.expected.classification = MetricClass::Generic;
    e.expected.notes = "immortal; algebraically collapsed blow-down";
    e.tags = {"semisimple", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "e2";
    e.dim_m = 3;
    e.entries = {{1, 2, 3, 1.0}, {1, 3, 2, -1.0}};
    e.expected.beta_diagonal = vec({-1, 0, 0});
    e.expected.ric_mod = Matrix::Zero(3, 3);
    e.expected.scal_mod = 0.0;
    e.expected.classification = MetricClass::Flat;
    e.expected.notes = "euclidean motion group; flat at the standard metric";
    e.tags = {"solvable", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "e11";
    e.dim_m = 3;
    e.entries = {{1, 2, 2, 1.0}, {1, 3, 3, -1.0}};
    e.expected.beta_diagonal = vec({-1, 0, 0});
    e.expected.ric_mod = diag({-2, 0, 0});
    e.expected.scal_mod = -2.0;
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "e(1,1); solvsoliton with derivation diag(0,2,2)";
    e.tags = {"solvable", "unimodular"};
    c.push_back(e);
  }

  for (int n = 2; n <= 4; ++n) {
    CatalogEntry e;
    e.name = "hyp(" + std::to_string(n) + ")";
    e.dim_m = n;
    for (int j = 2; j <= n; ++j) e.entries.push_back({1, j, j, 1.0});
    Vector beta = Vector::Zero(n);
    beta(0) = -1.0;
    e.expected.beta_diagonal = beta;
    Matrix ric = Matrix::Zero(n, n);
    ric(0, 0) = -(n - 1.0);
    e.expected.ric_mod = ric;
    e.expected.scal_mod = -(n - 1.0);
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "hyperbolic space as R x R^{n-1}; Einstein with Ric = -(n-1) Id";
    e.tags = {"solvable", "non_unimodular"};
    c.push_back(e);
  }

  {
    const double eps = 0.1;
    CatalogEntry e;
    e.name = "e2_eps";
    e.dim_m = 3;
    e.entries = {{1, 2, 2, eps}, {1, 2, 3, 1.0}, {1, 3, 2, -1.0}, {1, 3, 3, -eps}};
    e.expected.beta_diagonal = vec({-1, 0, 0});
    Matrix ric = Matrix::Zero(3, 3);
    ric(0, 0) = -2.0 * eps * eps;
    ric(1, 2) = ric(2, 1) = 2.0 * eps;
    e.expected.ric_mod = ric;
    e.expected.scal_mod = -2.0 * eps * eps;
    e.expected.classification = MetricClass::Generic;
    e.expected.notes = "rotation + diag(eps,-eps) deformation of e2; ||Ric||/|scal| unbounded";
    e.tags = {"solvable", "unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "r_heis3";
    e.dim_m = 4;
    e.entries = {{1, 2, 2, 1.0}, {1, 3, 3, 1.0}, {1, 4, 4, 2.0}, {2, 3, 4, 1.0}};
    e.expected.beta_diagonal = vec({-0.75, -0.25, -0.25, 0.25});
    e.expected.ric_mod = diag({-6, -0.5, -0.5, 0.5});
    e.expected.scal_mod = -6.5;
    e.expected.classification = MetricClass::Generic;
    e.expected.notes = "R acting on heis3 by the derivation diag(1,1,2); generic start, soliton blow-down";
    e.tags = {"solvable", "non_unimodular"};
    c.push_back(e);
  }

  {
    CatalogEntry e;
    e.name = "h2_isotropy";
    e.dim_h = 1;
    e.dim_m = 2;
    e.entries = {{1, 2, 3, 2.0}, {1, 3, 2, -2.0}, {2, 3, 1, -2.0}};
    e.expected.beta_diagonal = vec({-1.0 / 3, -1.0 / 3, -1.0 / 3});
    e.expected.ric_mod = diag({-4, -4});
    e.expected.scal_mod = -8.0;
    e.expected.classification = MetricClass::Soliton;
    e.expected.notes = "hyperbolic plane as sl(2,R)/so(2) with one-dimensional isotropy";
    e.tags = {"semisimple", "unimodular", "has_isotropy"};
    c.push_back(e);
  }

  return c;
}

}  // namespace detail

inline const std::vector<CatalogEntry>& catalog_entries() {
  static const std::vector<CatalogEntry> entries = detail::build_catalog();
  return entries;
}

inline const CatalogEntry& catalog_get(const std::string& name) {
  for (const auto& e : catalog_entries())
    if (e.name == name) return e;
  throw UnknownEntry("no catalog entry named '" + name + "'");
}

// Names of entries carrying every tag in the filter (all names when empty).
inline std::vector<std::string> catalog_list(const std::vector<std::string>& filter = {}) {
  std::vector<std::string> names;
  for (const auto& e : catalog_entries()) {
    bool keep = true;
    for (const auto& t : filter)
      if (!e.has_tag(t)) {
        keep = false;
        break;
      }
    if (keep) names.push_back(e.name);
  }
  return names;
}

}  // namespace bracketflow
