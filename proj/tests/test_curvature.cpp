#include <catch2/catch_amalgamated.hpp>

#include "bracketflow/bracket.hpp"
#include "bracketflow/catalog.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/stratification.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace bracketflow;
using Catch::Approx;

namespace {

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("killing form on the classical three dimensional algebras") {
  Matrix k_su2 = killing_form(catalog_get("su2").bracket());
  CHECK(max_abs(k_su2 + 2.0 * Matrix::Identity(3, 3)) < 1e-12);

  Matrix k_sl2 = killing_form(catalog_get("sl2r").bracket());
  Matrix expected(3, 3);
  expected << 8, 0, 0, 0, 0, 4, 0, 4, 0;
  CHECK(max_abs(k_sl2 - expected) < 1e-12);

  // nilpotent: Killing form vanishes
  CHECK(max_abs(killing_form(catalog_get("heis3").bracket())) < 1e-14);
}

TEST_CASE("moment map values and trace normalization") {
  Bracket h3 = catalog_get("heis3").bracket();
  Matrix m = moment_map(h3);
  Matrix expected = Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal();
  CHECK(max_abs(m - expected) < 1e-12);
  CHECK(m.trace() == Approx(-1.0).margin(1e-12));

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Bracket b = testsupport::random_nonzero_bracket(rng, 0, 5);
    CHECK(moment_map(b).trace() == Approx(-1.0).margin(1e-10));
  }
}

TEST_CASE("moment map duality pairing") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const int dh = trial % 3 == 0 ? 1 : 0;
    const int dm = 3 + trial % 3;
    Bracket b = testsupport::random_nonzero_bracket(rng, dh, dm);
    const int n = dh + dm;
    Matrix a = Matrix::Random(n, n);
    const double lhs =
        (moment_map(b).transpose() * a).trace() * bracket_norm(b) * bracket_norm(b);
    const double rhs = bracket_inner(pi_action(a, b), b);
    CHECK(lhs == Approx(rhs).margin(1e-9 * (1.0 + std::abs(rhs))));
  }
}

TEST_CASE("moment map is equivariant under orthogonal gauges") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Bracket b = testsupport::random_nonzero_bracket(rng, 0, 4);
    Matrix k = testsupport::random_orthogonal(rng, 4);
    Matrix lhs = moment_map(act(k, b));
    Matrix rhs = k * moment_map(b) * k.transpose();
    CHECK(max_abs(lhs - rhs) < 1e-9);
  }
}

TEST_CASE("curvature of the Heisenberg bracket") {
  CurvatureReport r = curvature_report(catalog_get("heis3").bracket());
  Matrix expected = Eigen::Vector3d(-0.5, -0.5, 0.5).asDiagonal();
  CHECK(max_abs(r.ric_mod - expected) < 1e-12);
  CHECK(r.scal_mod == Approx(-0.5).margin(1e-12));
  // unimodular: no mean curvature correction
  CHECK(r.mean_curv.norm() < 1e-14);
  CHECK(max_abs(r.ric - r.ric_mod) < 1e-14);
  CHECK(r.scal == Approx(r.scal_mod).margin(1e-14));
}

TEST_CASE("curvature of the hyperbolic plane presentation") {
  CurvatureReport r = curvature_report(catalog_get("hyp(2)").bracket());
  CHECK(max_abs(r.ric_mod - Matrix(Eigen::Vector2d(-1.0, 0.0).asDiagonal())) < 1e-12);
  CHECK(max_abs(r.ric + Matrix::Identity(2, 2)) < 1e-12);
  CHECK(r.mean_curv(0) == Approx(1.0).margin(1e-12));
  CHECK(r.scal == Approx(-2.0).margin(1e-12));
  CHECK(r.scal_mod == Approx(-1.0).margin(1e-12));
}

TEST_CASE("scalar curvature defect equals the squared mean curvature") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    Bracket b = testsupport::random_nonzero_bracket(rng, 0, 4);
    CurvatureReport r = curvature_report(b, CurvatureOptions{.check_jacobi = false});
    CHECK(r.scal_mod - r.scal ==
          Approx(r.mean_curv.squaredNorm()).margin(1e-10 * (1.0 + std::abs(r.scal))));
  }
}

TEST_CASE("moment map splits into the two curvature summands") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const int dh = trial % 2;
    const int dm = 3;
    Bracket b = testsupport::random_nonzero_bracket(rng, dh, dm);
    // the split holds when the isotropy acts on m by skew maps (that is what
    // an invariant inner product means); enforce it on the random draw
    for (int i = 0; i < dh; ++i)
      for (int x = 0; x < dm; ++x)
        for (int k = 0; k <= x; ++k) {
          const double s =
              0.5 * (b.at(i, dh + x, dh + k) - b.at(i, dh + k, dh + x));
          b.set(i, dh + x, dh + k, s);
          if (k < x) b.set(i, dh + k, dh + x, -s);
        }
    CHECK(m_identity_check(b) < 1e-10);
  }
  for (const auto& entry : catalog_entries())
    CHECK(m_identity_check(entry.bracket()) < 1e-10);
}

TEST_CASE("moment map curvature agrees with the connection oracle") {
  for (const auto& entry : catalog_entries()) {
    if (entry.dim_h != 0)
      continue;
    Bracket b = entry.bracket();
    if (bracket_norm(b) == 0.0)
      continue;
    CurvatureReport r = curvature_report(b);
    Matrix oracle = testsupport::koszul_ricci(b);
    INFO("entry " << entry.name);
    CHECK(max_abs(r.ric - oracle) < 1e-10 * (1.0 + max_abs(oracle)));
  }
}

TEST_CASE("curvature report rejects non Lie brackets unless asked not to") {
  Bracket b = make_bracket(
      0, 3, {{1, 2, 1, 0.1}, {1, 2, 3, 1.0}, {2, 3, 1, 1.0}, {1, 3, 2, -1.0}});
  CHECK_THROWS_AS(curvature_report(b), NotALieBracket);
  CHECK_NOTHROW(curvature_report(b, CurvatureOptions{.check_jacobi = false}));
}

TEST_CASE("curvature transforms equivariantly under orthogonal gauges") {
  std::mt19937_64 rng(37);
  Bracket b = catalog_get("sl2r").bracket();
  for (int trial = 0; trial < 10; ++trial) {
    Matrix k = testsupport::random_orthogonal(rng, 3);
    CurvatureReport moved = curvature_report(act(k, b));
    CurvatureReport base = curvature_report(b);
    CHECK(max_abs(moved.ric_mod - k * base.ric_mod * k.transpose()) < 1e-9);
    CHECK(moved.scal == Approx(base.scal).margin(1e-9));
  }
}

TEST_CASE("soliton estimates at the Heisenberg critical point") {
  Bracket b = catalog_get("heis3").bracket();
  StratumLabel label = beta_from_nilradical(b);
  EstimateReport e = estimates(b, label);
  CHECK(e.pairing_beta_plus == Approx(0.0).margin(1e-10));
  CHECK(e.gap == Approx(0.0).margin(1e-10));
  CHECK(e.equality_residual == Approx(0.0).margin(1e-10));
}

TEST_CASE("soliton estimates are strict away from the critical point") {
  Bracket b = catalog_get("sl2r").bracket();
  StratumLabel label = beta_from_nilradical(b);
  EstimateReport e = estimates(b, label);
  // semisimple label: the shifted diagonal vanishes, so the pairing is exact zero
  CHECK(e.pairing_beta_plus == Approx(0.0).margin(1e-9));
  const double gap_expected = std::sqrt(64.75) - 8.5 / std::sqrt(3.0);
  CHECK(e.gap == Approx(gap_expected).epsilon(1e-6));
  CHECK(e.gap > 3.0);
  CHECK(e.equality_residual > 1.0);
}

TEST_CASE("estimates require negative modified scalar curvature") {
  Bracket b = catalog_get("su2").bracket();
  StratumLabel label = beta_from_nilradical(b);
  CHECK_THROWS_AS(estimates(b, label), ScalModNonnegative);
}

TEST_CASE("classification of catalog representatives") {
  auto classify_of = [](const char* name) {
    Bracket b = catalog_get(name).bracket();
    StratumLabel label = beta_from_nilradical(b);
    return classify(b, label, 1e-8);
  };

  Classification h3 = classify_of("heis3");
  CHECK(h3.kind == MetricClass::Soliton);
  CHECK(h3.c == Approx(-1.5).margin(1e-10));
  CHECK(max_abs(h3.D - Matrix(Eigen::Vector3d(1.0, 1.0, 2.0).asDiagonal())) < 1e-9);
  CHECK(h3.derivation_res < 1e-9);

  Classification s2 = classify_of("su2");
  CHECK(s2.kind == MetricClass::Soliton);
  CHECK(s2.c == Approx(0.5).margin(1e-10));
  CHECK(max_abs(s2.D) < 1e-10);

  Classification e11 = classify_of("e11");
  CHECK(e11.kind == MetricClass::Soliton);
  CHECK(e11.c == Approx(-2.0).margin(1e-9));
  CHECK(max_abs(e11.D - Matrix(Eigen::Vector3d(0.0, 2.0, 2.0).asDiagonal())) < 1e-8);

  Classification h2 = classify_of("hyp(2)");
  CHECK(h2.kind == MetricClass::Soliton);
  CHECK(h2.c == Approx(-1.0).margin(1e-9));
  CHECK(max_abs(h2.D - Matrix(Eigen::Vector2d(0.0, 1.0).asDiagonal())) < 1e-8);

  CHECK(classify_of("sl2r").kind == MetricClass::Generic);
  CHECK(classify_of("e2_eps").kind == MetricClass::Generic);
  CHECK(classify_of("r_heis3").kind == MetricClass::Generic);

  Bracket flat = catalog_get("e2").bracket();
  StratumLabel flat_label = label_from_diagonal(Eigen::Vector3d(-1.0, 0.0, 0.0), 0);
  CHECK(classify(flat, flat_label, 1e-8).kind == MetricClass::Flat);
}
