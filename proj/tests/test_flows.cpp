#include <catch2/catch_amalgamated.hpp>

#include "bracketflow/bracket.hpp"
#include "bracketflow/catalog.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/flows.hpp"
#include "bracketflow/stratification.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace bracketflow;
using Catch::Approx;

namespace {

std::vector<double> uniform_grid(double t_end, int count) {
  std::vector<double> ts;
  for (int i = 0; i <= count; ++i)
    ts.push_back(t_end * i / count);
  return ts;
}

Vector sorted_eigs(const Matrix& a) {
  return symmetric_eigen(a).values;
}

} // namespace

TEST_CASE("unimodular flow keeps the soliton direction fixed") {
  Bracket h3 = catalog_get("heis3").bracket();
  FlowOptions opts;
  opts.sample_times = uniform_grid(10.0, 20);
  FlowTrajectory traj = bracket_flow(h3, 10.0, FlowVariant::Unimodular, nullptr, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);
  REQUIRE(traj.size() >= 20);

  const double n0 = bracket_norm(traj.states.front());
  for (size_t i = 0; i < traj.size(); ++i) {
    const Bracket& b = traj.states[i];
    const double ni = bracket_norm(b);
    double dir_diff = 0.0;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y)
        for (int z = 0; z < 3; ++z)
          dir_diff = std::max(dir_diff,
                              std::abs(b.at(x, y, z) / ni -
                                       traj.states.front().at(x, y, z) / n0));
    CHECK(dir_diff < 1e-7);
    // closed form: scal~(t) = -1/2 / (1 + 3t)
    CHECK(traj.scal_mod[i] ==
          Approx(-0.5 / (1.0 + 3.0 * traj.times[i])).epsilon(1e-6));
  }
  // no volume scalar outside the gauged variant
  CHECK(std::isnan(traj.v_beta.front()));
}

TEST_CASE("gauged flow on the Heisenberg soliton has closed form invariants") {
  Bracket h3 = catalog_get("heis3").bracket();
  StratumLabel label = stratum_label(h3);
  FlowOptions opts;
  opts.sample_times = {0.0, 1.0, 10.0, 100.0};
  FlowTrajectory traj = bracket_flow(h3, 100.0, FlowVariant::Gauged, &label, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);
  REQUIRE(traj.size() == 4);

  for (size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    CHECK(traj.v_beta[i] == Approx(std::sqrt(1.0 + 3.0 * t)).epsilon(1e-6));
    CHECK(traj.f_beta[i] == Approx(-0.5).margin(1e-8));
    CHECK(traj.scal_mod[i] == Approx(-0.5 / (1.0 + 3.0 * t)).epsilon(1e-6));
  }

  // h(t) = diag(s, s, 1/s) with s = (1+3t)^{1/6}
  const double s10 = std::pow(31.0, 1.0 / 6.0);
  const Matrix& h10 = traj.gauges[2];
  CHECK(h10(0, 0) == Approx(s10).epsilon(1e-5));
  CHECK(h10(1, 1) == Approx(s10).epsilon(1e-5));
  CHECK(h10(2, 2) == Approx(1.0 / s10).epsilon(1e-5));
  CHECK(std::abs(h10(0, 1)) + std::abs(h10(0, 2)) + std::abs(h10(1, 2)) < 1e-7);

  // the product formula through the gauge agrees with the integrated scalar
  for (size_t i = 0; i < traj.size(); ++i)
    CHECK(beta_volume_gauge(traj.gauges[i], label) ==
          Approx(traj.v_beta[i]).epsilon(1e-6));
}

TEST_CASE("volume scalar from the ODE matches the product formula off the soliton") {
  for (const char* name : {"sl2r", "e11"}) {
    Bracket b = catalog_get(name).bracket();
    StratumLabel label = stratum_label(b);
    FlowOptions opts;
    opts.sample_times = uniform_grid(5.0, 10);
    FlowTrajectory traj = bracket_flow(b, 5.0, FlowVariant::Gauged, &label, opts);
    REQUIRE(traj.termination == TerminationStatus::Completed);
    INFO("entry " << name);
    for (size_t i = 0; i < traj.size(); ++i)
      CHECK(beta_volume_gauge(traj.gauges[i], label) ==
            Approx(traj.v_beta[i]).epsilon(1e-6));
  }
}

TEST_CASE("lyapunov quantity is monotone and satisfies its derivative formula") {
  Bracket b = catalog_get("sl2r").bracket();
  StratumLabel label = stratum_label(b);
  // record every accepted step at tight tolerance: both the per-step
  // monotonicity margin and the derivative stencil need the accuracy
  FlowOptions opts;
  opts.rtol = 1e-11;
  opts.atol = 1e-14;
  FlowTrajectory traj = bracket_flow(b, 2.0, FlowVariant::Gauged, &label, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);

  for (size_t i = 0; i + 1 < traj.size(); ++i)
    CHECK(traj.f_beta[i + 1] >= traj.f_beta[i] - 1e-10);

  // dF/dt = 2 v^2 (||Ric~||^2 + scal~ <Ric~, beta_m>)
  const Matrix bm = label.beta_m_original();
  CurvatureOptions copts;
  copts.check_jacobi = false;
  for (size_t i = 2; i + 2 < traj.size(); ++i) {
    const double df = lagrange_derivative(traj.times, traj.f_beta, i);
    const CurvatureReport rep = curvature_report(traj.states[i], copts);
    const double vv = traj.v_beta[i] * traj.v_beta[i];
    const double rhs = 2.0 * vv *
                       (rep.ric_mod.squaredNorm() +
                        rep.scal_mod * (rep.ric_mod.transpose() * bm).trace());
    CHECK(df == Approx(rhs).margin(1e-4 * (1.0 + std::abs(rhs))));
  }
}

TEST_CASE("lyapunov quantity vanishes identically on flat brackets") {
  Bracket ab = catalog_get("abelian(3)").bracket();
  StratumLabel label = label_from_diagonal(Eigen::Vector3d(-1.0, 0.0, 0.0), 0);
  CHECK(lyapunov_F(ab, 1.7, label) == 0.0);
}

TEST_CASE("lyapunov quantity is scale invariant") {
  Bracket b = catalog_get("sl2r").bracket();
  StratumLabel label = stratum_label(b);
  const double f = lyapunov_F(b, 0.8, label);
  for (double c : {0.5, 2.0, 7.0}) {
    const double fc = lyapunov_F(scale_bracket(c, b), 0.8 / c, label);
    CHECK(fc == Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("scalar curvature obeys its evolution equation along flows") {
  // every accepted step is recorded: the integrator's own step sizes resolve
  // the early transient well enough for the stencil to track the derivative.
  // The stencil bias scales like rtol^{4/5}, hence the tightened tolerances.
  FlowOptions opts;
  opts.rtol = 1e-11;
  opts.atol = 1e-14;
  for (const char* name : {"sl2r", "e11"}) {
    Bracket b = catalog_get(name).bracket();
    FlowTrajectory traj = bracket_flow(b, 5.0, FlowVariant::Unimodular, nullptr, opts);
    REQUIRE(traj.termination == TerminationStatus::Completed);
    INFO("entry " << name);
    double worst = 0.0;
    for (size_t i = 2; i + 2 < traj.size(); ++i) {
      const double lhs = lagrange_derivative(traj.times, traj.scal_mod, i);
      const double rhs = 2.0 * traj.ric_mod_norm[i] * traj.ric_mod_norm[i];
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("plain and unimodular flows agree on orthogonal invariants") {
  for (const char* name : {"hyp(2)", "r_heis3"}) {
    Bracket b = catalog_get(name).bracket();
    FlowOptions opts;
    opts.sample_times = uniform_grid(3.0, 12);
    FlowTrajectory plain = bracket_flow(b, 3.0, FlowVariant::Plain, nullptr, opts);
    FlowTrajectory uni = bracket_flow(b, 3.0, FlowVariant::Unimodular, nullptr, opts);
    REQUIRE(plain.termination == TerminationStatus::Completed);
    REQUIRE(uni.termination == TerminationStatus::Completed);
    REQUIRE(plain.size() == uni.size());
    CurvatureOptions copts;
    INFO("entry " << name);
    for (size_t i = 0; i < plain.size(); ++i) {
      CHECK(bracket_norm(plain.states[i]) ==
            Approx(bracket_norm(uni.states[i])).epsilon(1e-7));
      CHECK(plain.scal[i] == Approx(uni.scal[i]).margin(1e-7 * (1.0 + std::abs(uni.scal[i]))));
      Vector ep = sorted_eigs(curvature_report(plain.states[i], copts).ric_mod);
      Vector eu = sorted_eigs(curvature_report(uni.states[i], copts).ric_mod);
      for (int k = 0; k < ep.size(); ++k)
        CHECK(ep(k) == Approx(eu(k)).margin(1e-7 * (1.0 + std::abs(eu(k)))));
      CHECK(plain.jacobi[i] < 1e-9);
      CHECK(uni.jacobi[i] < 1e-9);
    }
  }

  // unimodular start: the two variants coincide outright
  Bracket h3 = catalog_get("heis3").bracket();
  FlowOptions opts;
  opts.sample_times = uniform_grid(3.0, 6);
  FlowTrajectory plain = bracket_flow(h3, 3.0, FlowVariant::Plain, nullptr, opts);
  FlowTrajectory uni = bracket_flow(h3, 3.0, FlowVariant::Unimodular, nullptr, opts);
  for (size_t i = 0; i < plain.size(); ++i)
    CHECK(bracket_inner(plain.states[i], uni.states[i]) ==
          Approx(bracket_norm(uni.states[i]) * bracket_norm(uni.states[i]))
              .epsilon(1e-9));
}

TEST_CASE("gauged trajectories stay inside the nonnegative cone") {
  Bracket b = catalog_get("sl2r").bracket();
  StratumLabel label = stratum_label(b);
  FlowOptions opts;
  opts.sample_times = {0.0, 0.1, 1.0, 10.0, 100.0};
  FlowTrajectory traj = bracket_flow(b, 100.0, FlowVariant::Gauged, &label, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);
  for (const Bracket& state : traj.states)
    CHECK(negative_component_mass(state, label) < 1e-8);
}

TEST_CASE("positive scalar curvature forces finite extinction") {
  Bracket s = catalog_get("su2").bracket();
  FlowTrajectory traj = bracket_flow(s, 100.0, FlowVariant::Unimodular);
  CHECK(traj.termination == TerminationStatus::BlowUp);
  REQUIRE(!traj.scal_mod.empty());
  CHECK(traj.scal_mod.back() > 0.0);
  // closed form blows up at t = 1
  CHECK(traj.times.back() > 0.99);
  CHECK(traj.times.back() < 1.01);
  CHECK(!traj.message.empty());
}

TEST_CASE("metric flow closed forms") {
  Bracket hyp = catalog_get("hyp(2)").bracket();
  FlowOptions opts;
  opts.sample_times = uniform_grid(10.0, 5);
  FlowTrajectory traj = metric_ricci_flow(hyp, MetricState{Matrix::Identity(2, 2)},
                                          10.0, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);
  for (size_t i = 0; i < traj.size(); ++i) {
    const Matrix expected = (1.0 + 2.0 * traj.times[i]) * Matrix::Identity(2, 2);
    CHECK((traj.metric_states[i] - expected).norm() < 1e-6 * expected.norm());
  }

  Bracket h3 = catalog_get("heis3").bracket();
  FlowTrajectory t3 = metric_ricci_flow(h3, MetricState{Matrix::Identity(3, 3)},
                                        10.0, opts);
  REQUIRE(t3.termination == TerminationStatus::Completed);
  const double w = std::pow(31.0, 1.0 / 3.0);
  const Matrix& p10 = t3.metric_states.back();
  CHECK(p10(0, 0) == Approx(w).epsilon(1e-6));
  CHECK(p10(1, 1) == Approx(w).epsilon(1e-6));
  CHECK(p10(2, 2) == Approx(1.0 / w).epsilon(1e-6));

  // metric side volume scalar agrees with the gauge side closed form
  StratumLabel label = stratum_label(h3);
  CHECK(beta_volume_metric(p10, label) == Approx(std::sqrt(31.0)).epsilon(1e-5));
}

TEST_CASE("metric flow detects collapsing metrics") {
  Bracket s = catalog_get("su2").bracket();
  FlowTrajectory traj = metric_ricci_flow(s, MetricState{Matrix::Identity(3, 3)}, 2.0);
  CHECK(traj.termination == TerminationStatus::BlowUp);
  CHECK(traj.times.back() > 0.9);
  CHECK(traj.times.back() < 1.05);
}

TEST_CASE("bracket flow and metric flow are two charts of the same evolution") {
  for (const char* name : {"heis3", "hyp(2)"}) {
    Bracket b = catalog_get(name).bracket();
    INFO("entry " << name);
    CHECK(equivalence_check(b, MetricState{Matrix::Identity(b.dim_m(), b.dim_m())},
                            10.0) < 1e-6);
  }
}

TEST_CASE("volume scalars follow the product formulas and scaling laws") {
  StratumLabel label = label_from_diagonal(Eigen::Vector3d(-1.0, -1.0, 1.0), 0);
  Matrix h = Eigen::Vector3d(1.3, 0.7, 2.1).asDiagonal();
  const double v = beta_volume_gauge(h, label);
  CHECK(v == Approx(1.3 * 0.7 / 2.1).epsilon(1e-12));

  // geometric rescaling mu -> c.mu corresponds to h -> h/c and v -> v/c
  for (double c : {2.0, 5.0, 0.25}) {
    CHECK(beta_volume_gauge(h / c, label) == Approx(v / c).epsilon(1e-10));
    Matrix p = h.transpose() * h;
    CHECK(beta_volume_metric(p, label) == Approx(v).epsilon(1e-12));
    CHECK(beta_volume_metric(p / (c * c), label) == Approx(v / c).epsilon(1e-10));
  }

  // identity gauge has unit volume for any label
  CHECK(beta_volume_gauge(Matrix::Identity(3, 3), label) == Approx(1.0));

  // semisimple label: v = |det h|^{1/3}
  StratumLabel iso = label_from_diagonal(Eigen::Vector3d(-1.0 / 3, -1.0 / 3, -1.0 / 3), 0);
  Matrix hd = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
  CHECK(beta_volume_gauge(hd, iso) == Approx(std::pow(6.0, 1.0 / 3.0)).epsilon(1e-12));

  // mixing eigenvalue clusters upward breaks the triangular structure
  Matrix bad = Matrix::Identity(3, 3);
  bad(0, 2) = 0.5;
  CHECK_THROWS_AS(beta_volume_gauge(bad, label), NonTriangularGauge);
}

TEST_CASE("blow down rescales a trajectory in place") {
  Bracket b = catalog_get("heis3").bracket();
  StratumLabel label = stratum_label(b);
  FlowOptions opts;
  opts.sample_times = {0.0, 1.0, 4.0, 9.0, 16.0};
  FlowTrajectory traj = bracket_flow(b, 16.0, FlowVariant::Gauged, &label, opts);
  REQUIRE(traj.termination == TerminationStatus::Completed);

  CHECK_THROWS_AS(blow_down(traj, 0.0), OutOfRange);
  CHECK_THROWS_AS(blow_down(traj, -2.0), OutOfRange);

  FlowTrajectory same = blow_down(traj, 1.0);
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(same.times[i] == Approx(traj.times[i]));
    CHECK(bracket_inner(same.states[i], traj.states[i]) ==
          Approx(bracket_norm(traj.states[i]) * bracket_norm(traj.states[i])));
  }

  FlowTrajectory bd = blow_down(traj, 4.0);
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(bd.times[i] == Approx(traj.times[i] / 4.0));
    CHECK(bracket_norm(bd.states[i]) ==
          Approx(2.0 * bracket_norm(traj.states[i])).epsilon(1e-12));
    CHECK(bd.v_beta[i] == Approx(traj.v_beta[i] / 2.0).epsilon(1e-12));
    CHECK(bd.f_beta[i] == Approx(traj.f_beta[i]).margin(1e-12));
  }
}

TEST_CASE("collapse diagnostic on synthetic sequences") {
  Bracket h3 = catalog_get("heis3").bracket();
  std::vector<Bracket> constant(8, h3);
  CollapseReport flat = collapse_diagnostic(constant);
  CHECK(flat.bounded);
  CHECK(flat.trend == Approx(0.0).margin(1e-12));
  CHECK(flat.sup_norm == Approx(std::sqrt(2.0)));

  std::vector<Bracket> growing;
  for (int k = 0; k < 8; ++k)
    growing.push_back(scale_bracket(std::pow(2.0, k), h3));
  CollapseReport coll = collapse_diagnostic(growing);
  CHECK(!coll.bounded);
  CHECK(coll.trend > 0.5);
  CHECK(coll.sup_norm == Approx(128.0 * std::sqrt(2.0)));
}

TEST_CASE("type III quantity splits the two ranges") {
  CHECK(type_iii_quantity(catalog_get("heis3").bracket()) == Approx(std::sqrt(2.0)));
  CHECK(type_iii_quantity(catalog_get("h2_isotropy").bracket()) ==
        Approx(std::pow(8.0, 0.25)));
}

TEST_CASE("derivative estimates are exact on polynomials") {
  std::vector<double> ts, ys;
  for (int i = 0; i < 9; ++i) {
    const double t = 0.3 * i + 0.01 * i * i;  // nonuniform
    ts.push_back(t);
    ys.push_back(1.0 + t - 2.0 * t * t + 0.5 * t * t * t * t);
  }
  for (size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const double exact = 1.0 - 4.0 * t + 2.0 * t * t * t;
    CHECK(lagrange_derivative(ts, ys, i) == Approx(exact).margin(1e-9));
  }
}

TEST_CASE("gauged flow requires a label") {
  Bracket b = catalog_get("heis3").bracket();
  CHECK_THROWS_AS(bracket_flow(b, 1.0, FlowVariant::Gauged), BadConfig);
}
