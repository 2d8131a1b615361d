// Integrator tests.  Oracles: closed-form solutions of x'' = B x for
// constant B (trigonometric / hyperbolic / linear), hand-propagated
// piecewise profiles, exact rotation blocks for symplecticity, and
// step-halving ratios for the order of accuracy.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "maslov/jacobi_flow.hpp"
#include "support.hpp"

using namespace maslov;
using namespace testsupport;

namespace {

LagrangianFrame column_frame_1d(double x, double v) {
  RealMatrix m(2, 1);
  m(0, 0) = x;
  m(1, 0) = v;
  return LagrangianFrame(1, std::move(m));
}

CurvatureProfile sphere_like_1d(double b) {
  RealMatrix r(1, 1);
  r(0, 0) = -1.0;
  return make_constant_profile(1, 0.0, b, r);
}

}  // namespace

TEST_CASE("factories validate payloads") {
  RealMatrix bad(2, 2);
  bad(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(make_constant_profile(2, 0.0, 1.0, bad), InvalidSpec);
  CHECK_THROWS_AS(make_constant_profile(2, 1.0, 1.0, RealMatrix::identity(2)), InvalidSpec);
  CHECK_THROWS_AS(make_diagonal_profile(0.0, 1.0, {}), InvalidSpec);
  CHECK_THROWS_AS(
      make_piecewise_profile(1, {0.0, 0.5}, {RealMatrix(1, 1), RealMatrix(1, 1)}),
      InvalidSpec);
  CHECK_THROWS_AS(make_piecewise_profile(1, {0.0, 0.6, 0.5}, {RealMatrix(1, 1), RealMatrix(1, 1)}),
                  InvalidSpec);
  CHECK_THROWS_AS(make_polynomial_profile(2, 0.0, 1.0, {}), InvalidSpec);
  CHECK_THROWS_AS(make_sampled_profile(1, {0.0}, {RealMatrix(1, 1)}), InvalidSpec);
  CHECK_THROWS_AS(make_sampled_profile(1, {0.0, 0.0}, {RealMatrix(1, 1), RealMatrix(1, 1)}),
                  InvalidSpec);
}

TEST_CASE("curvature_at: piecewise takes the right piece, b the last") {
  RealMatrix r0(1, 1), r1(1, 1);
  r0(0, 0) = -25.0;
  r1(0, 0) = 0.0;
  const CurvatureProfile p = make_piecewise_profile(1, {0.0, 1.0, 2.0}, {r0, r1});
  CHECK(curvature_at(p, 0.5)(0, 0) == -25.0);
  CHECK(curvature_at(p, 1.0)(0, 0) == 0.0);  // breakpoint belongs to the right piece
  CHECK(curvature_at(p, 2.0)(0, 0) == 0.0);  // b stays in the last piece
  CHECK_THROWS_AS(curvature_at(p, 2.5), ProfileDomain);
  CHECK_THROWS_AS(curvature_at(p, -0.1), ProfileDomain);
}

TEST_CASE("curvature_at: polynomial and sampled kinds evaluate exactly") {
  std::mt19937_64 rng(301);
  const RealMatrix c0 = random_symmetric(rng, 2, 1.0);
  const RealMatrix c1 = random_symmetric(rng, 2, 1.0);
  const RealMatrix c2 = random_symmetric(rng, 2, 1.0);
  const CurvatureProfile poly = make_polynomial_profile(2, -1.0, 2.0, {c0, c1, c2});
  for (double t : {-1.0, 0.0, 0.37, 2.0}) {
    const RealMatrix expect = c0 + t * c1 + (t * t) * c2;
    CHECK(max_abs_diff(curvature_at(poly, t), expect) < 1e-14);
  }

  const RealMatrix v0 = random_symmetric(rng, 2, 1.0);
  const RealMatrix v1 = random_symmetric(rng, 2, 1.0);
  const CurvatureProfile samp = make_sampled_profile(2, {0.0, 1.0}, {v0, v1});
  CHECK(max_abs_diff(curvature_at(samp, 0.0), v0) < 1e-15);
  CHECK(max_abs_diff(curvature_at(samp, 1.0), v1) < 1e-15);
  CHECK(max_abs_diff(curvature_at(samp, 0.25), 0.75 * v0 + 0.25 * v1) < 1e-14);
}

TEST_CASE("coefficient: flat blocks and lambda shift") {
  const CurvatureProfile flat2 = make_constant_profile(2, 0.0, 1.0, RealMatrix(2, 2));
  const RealMatrix a0 = coefficient(flat2, 0.3, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(a0(i, j) == ((j == i + 2) ? 1.0 : 0.0));

  const CurvatureProfile flat1 = make_constant_profile(1, 0.0, 1.0, RealMatrix(1, 1));
  const RealMatrix a1 = coefficient(flat1, 0.5, -1.0);
  CHECK(a1(0, 0) == 0.0);
  CHECK(a1(0, 1) == 1.0);
  CHECK(a1(1, 0) == 1.0);  // R - lambda I = I
  CHECK(a1(1, 1) == 0.0);
}

TEST_CASE("coefficient: J*A is symmetric exactly") {
  std::mt19937_64 rng(302);
  const CurvatureProfile p =
      make_polynomial_profile(3, 0.0, 2.0,
                              {random_symmetric(rng, 3, 2.0), random_symmetric(rng, 3, 1.0)});
  for (double t : {0.0, 0.7, 1.9}) {
    const RealMatrix a = coefficient(p, t, -0.8);
    // J A with J(q,p) = (-p, q): top rows = -(bottom rows of A), bottom = top.
    RealMatrix ja(6, 6);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        ja(i, j) = -a(3 + i, j);
        ja(3 + i, j) = a(i, j);
      }
    CHECK(asymmetry(ja) == 0.0);
  }
}

TEST_CASE("flat space: sigma flows to span [tI; I]") {
  const CurvatureProfile p = make_constant_profile(2, 0.0, 3.0, RealMatrix(2, 2));
  for (double t : {0.5, 1.7, 3.0}) {
    const LagrangianFrame got = sigma_lambda(p, 0.0, t);
    RealMatrix expect(4, 2);
    expect(0, 0) = t;
    expect(1, 1) = t;
    expect(2, 0) = 1.0;
    expect(3, 1) = 1.0;
    CHECK(subspace_gap(got, LagrangianFrame(2, std::move(expect))) < 1e-10);
  }
}

TEST_CASE("R = -1: sigma flows to span (sin t, cos t)") {
  const CurvatureProfile p = sphere_like_1d(4.0);
  for (double t : {0.5, 1.2, 3.0}) {
    const LagrangianFrame got = sigma_lambda(p, 0.0, t);
    CHECK(subspace_gap(got, column_frame_1d(std::sin(t), std::cos(t))) < 1e-10);
  }
}

TEST_CASE("R = +1: sigma flows to span (sinh t, cosh t), never vertical") {
  RealMatrix r(1, 1);
  r(0, 0) = 1.0;
  const CurvatureProfile p = make_constant_profile(1, 0.0, 3.0, r);
  for (double t : {0.4, 1.5, 3.0}) {
    const LagrangianFrame got = sigma_lambda(p, 0.0, t);
    CHECK(subspace_gap(got, column_frame_1d(std::sinh(t), std::cosh(t))) < 1e-9);
    CHECK(intersection_dim(got) == 0);
  }
}

TEST_CASE("lambda shift: R = -1, lambda = -3 behaves like B = 2") {
  const CurvatureProfile p = sphere_like_1d(2.0);
  const double s2 = std::sqrt(2.0);
  for (double t : {0.5, 1.3, 2.0}) {
    const LagrangianFrame got = sigma_lambda(p, -3.0, t);
    CHECK(subspace_gap(got, column_frame_1d(std::sinh(s2 * t) / s2, std::cosh(s2 * t))) < 1e-9);
  }
}

TEST_CASE("split spectrum: diag(-1,-4) flows to decoupled sines") {
  const CurvatureProfile p = make_diagonal_profile(0.0, 4.0, {-1.0, -4.0});
  for (double t : {0.6, 2.1}) {
    const LagrangianFrame got = sigma_lambda(p, 0.0, t);
    RealMatrix expect(4, 2);
    expect(0, 0) = std::sin(t);
    expect(1, 1) = std::sin(2.0 * t) / 2.0;
    expect(2, 0) = std::cos(t);
    expect(3, 1) = std::cos(2.0 * t);
    CHECK(subspace_gap(got, LagrangianFrame(2, std::move(expect))) < 1e-10);
  }
}

TEST_CASE("piecewise well: hand-propagated closed form across the breakpoint") {
  RealMatrix r0(1, 1), r1(1, 1);
  r0(0, 0) = -25.0;
  const CurvatureProfile p = make_piecewise_profile(1, {0.0, 1.0, 2.0}, {r0, r1});
  // on [0,1]: x = sin(5t)/5; then linear with slope cos(5).
  const double x1 = std::sin(5.0) / 5.0, v1 = std::cos(5.0);
  for (double t : {0.4, 1.0, 1.5, 2.0}) {
    const double x = t <= 1.0 ? std::sin(5.0 * t) / 5.0 : x1 + v1 * (t - 1.0);
    const double v = t <= 1.0 ? std::cos(5.0 * t) : v1;
    CHECK(subspace_gap(sigma_lambda(p, 0.0, t), column_frame_1d(x, v)) < 1e-9);
  }
}

TEST_CASE("schedule aligns to piecewise breakpoints") {
  RealMatrix r(1, 1);
  const CurvatureProfile p = make_piecewise_profile(1, {0.0, 0.37, 1.11, 2.0}, {r, r, r});
  FlowSettings s;
  s.steps = 64;
  const auto sched = detail::make_schedule(p, s);
  for (double bp : {0.37, 1.11}) {
    bool found = false;
    for (double node : sched.nodes) found = found || node == bp;
    CHECK(found);
  }
  CHECK(sched.nodes.front() == 0.0);
  CHECK(sched.nodes.back() == 2.0);
}

TEST_CASE("sigma_lambda at t = a returns sigma") {
  const CurvatureProfile p = sphere_like_1d(1.0);
  CHECK(subspace_gap(sigma_lambda(p, 0.0, 0.0), canonical_sigma(1)) == 0.0);
}

TEST_CASE("R = -1 on [0, 4]: vertical moment at t = pi") {
  const CurvatureProfile p = sphere_like_1d(4.0);
  const LagrangianFrame at_pi = sigma_lambda(p, 0.0, std::numbers::pi);
  CHECK(intersection_dim(at_pi) == 1);
  CHECK(intersection_dim(sigma_lambda(p, 0.0, 3.0)) == 0);
}

TEST_CASE("below the lower bound the flow never meets sigma") {
  const CurvatureProfile p = sphere_like_1d(6.0);
  const double lb = lambda_lower_bound(p, 1.0);
  CHECK(lb == -2.0);
  for (int k = 1; k <= 12; ++k) {
    const double t = 6.0 * static_cast<double>(k) / 12.0;
    CHECK(intersection_dim(sigma_lambda(p, lb, t)) == 0);
  }
}

TEST_CASE("lambda_lower_bound examples") {
  CHECK(lambda_lower_bound(make_constant_profile(2, 0.0, 1.0, RealMatrix(2, 2)), 0.5) == -0.5);
  RealMatrix minus(2, 2);
  minus(0, 0) = minus(1, 1) = -1.0;
  CHECK(lambda_lower_bound(make_constant_profile(2, 0.0, 1.0, minus), 1.0) == -2.0);
  CHECK(lambda_lower_bound(make_diagonal_profile(0.0, 4.0, {-1.0, -4.0}), 1.0) == -5.0);

  // polynomial: R(t) = t on [0,2] has minimum eigenvalue 0 at t = 0
  RealMatrix zero(1, 1), one(1, 1);
  one(0, 0) = 1.0;
  const double lb = lambda_lower_bound(make_polynomial_profile(1, 0.0, 2.0, {zero, one}), 1.0);
  CHECK(lb == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("symplectic residual: identity and exact rotation") {
  FundamentalSolution id;
  id.phi = RealMatrix::identity(4);
  CHECK(symplectic_residual(id) == 0.0);

  // 2D rotation acting on (q, p) is symplectic.
  FundamentalSolution rot;
  rot.phi = RealMatrix(2, 2);
  const double th = 0.83;
  rot.phi(0, 0) = std::cos(th);
  rot.phi(0, 1) = -std::sin(th);
  rot.phi(1, 0) = std::sin(th);
  rot.phi(1, 1) = std::cos(th);
  CHECK(symplectic_residual(rot) < 1e-15);
}

TEST_CASE("fundamental solution of a smooth profile stays symplectic") {
  std::mt19937_64 rng(303);
  const CurvatureProfile p = make_polynomial_profile(
      2, 0.0, 2.0, {random_symmetric(rng, 2, 1.0), random_symmetric(rng, 2, 0.5)});
  const FundamentalSolution f = integrate_fundamental(p, -0.3, 0.0, 2.0);
  CHECK(symplectic_residual(f) < 1e-6);

  // omega-constancy for two solution columns u, v: omega(Phi u, Phi v)
  // equals omega(u, v) for all t.
  std::vector<double> u = {0.3, -1.1, 0.7, 0.2}, v = {1.0, 0.4, -0.5, 0.9};
  auto omega = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x[2] * y[0] + x[3] * y[1] - x[0] * y[2] - x[1] * y[3];
  };
  const double base = omega(u, v);
  for (double t : {0.5, 1.2, 2.0}) {
    const FundamentalSolution ft = integrate_fundamental(p, -0.3, 0.0, t);
    std::vector<double> fu(4, 0.0), fv(4, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        fu[i] += ft.phi(i, j) * u[j];
        fv[i] += ft.phi(i, j) * v[j];
      }
    CHECK(std::abs(omega(fu, fv) - base) < 1e-6);
  }
}

TEST_CASE("step halving: order-4 convergence on a smooth profile") {
  std::mt19937_64 rng(304);
  RealMatrix c0 = random_symmetric(rng, 2, 0.4);
  RealMatrix c1 = random_symmetric(rng, 2, 0.3);
  const CurvatureProfile p = make_polynomial_profile(2, 0.0, 1.5, {c0, c1});
  auto chart_at_end = [&](std::size_t steps) {
    FlowSettings s;
    s.steps = steps;
    s.renormalize_every = 1u << 30;  // pure integration, no renormalization
    return to_chart(sigma_lambda(p, 0.0, 1.5, s), full_index_set(2)).S;
  };
  const RealMatrix s256 = chart_at_end(256);
  const RealMatrix s512 = chart_at_end(512);
  const RealMatrix s1024 = chart_at_end(1024);
  const double e_coarse = max_abs_diff(s256, s512);
  const double e_fine = max_abs_diff(s512, s1024);
  CHECK(e_fine > 0.0);
  const double ratio = e_coarse / e_fine;
  CHECK(ratio > 10.0);
  CHECK(ratio < 24.0);
}

TEST_CASE("time symmetry: constant profile returns sigma") {
  RealMatrix r(2, 2);
  r(0, 0) = r(1, 1) = -1.0;
  r(0, 1) = r(1, 0) = 0.2;
  const CurvatureProfile p = make_constant_profile(2, 0.0, 2.0, r);
  const LagrangianFrame fwd = sigma_lambda(p, 0.0, 2.0);
  const LagrangianFrame back = integrate_frame(p, 0.0, fwd, 2.0, 0.0);
  CHECK(subspace_gap(back, canonical_sigma(2)) < 1e-8);
}

TEST_CASE("transport is consistent with restarting mid-interval") {
  const CurvatureProfile p = sphere_like_1d(4.0);
  FlowEngine engine(p, FlowSettings{});
  const LagrangianFrame mid = engine.sigma_at(0.0, 0.3);
  const LagrangianFrame hop = engine.transport(mid, 0.3, 1.1, 0.0);
  CHECK(subspace_gap(hop, engine.sigma_at(0.0, 1.1)) < 1e-10);
}

TEST_CASE("integration is deterministic") {
  const CurvatureProfile p = make_diagonal_profile(0.0, 4.0, {-1.0, -4.0});
  const LagrangianFrame f1 = sigma_lambda(p, -0.7, 3.3);
  const LagrangianFrame f2 = sigma_lambda(p, -0.7, 3.3);
  CHECK(max_abs_diff(f1.m, f2.m) == 0.0);
}

TEST_CASE("drift is monitored and reported") {
  // A coupled profile: diagonal systems keep the symplectic form exactly by
  // sparsity, which would make the monitor vacuous.
  RealMatrix r(2, 2);
  r(0, 0) = -1.0;
  r(1, 1) = -4.0;
  r(0, 1) = r(1, 0) = 0.7;
  const CurvatureProfile p = make_constant_profile(2, 0.0, 4.0, r);
  FlowEngine engine(p, FlowSettings{});
  double drift = -1.0;
  (void)engine.sigma_at(0.0, 4.0, &drift);
  CHECK(drift >= 0.0);
  CHECK(drift < 1e-6);

  FlowSettings strangled;
  strangled.drift_tol = 1e-300;  // any roundoff at all must trip the monitor
  CHECK_THROWS_AS(sigma_lambda(p, 0.0, 4.0, strangled), NumericalFailure);
}

TEST_CASE("checkpointed advance matches direct sampling") {
  const CurvatureProfile p = sphere_like_1d(4.0);
  FlowEngine engine(p, FlowSettings{});
  FrameState st = engine.start_state();
  const auto& sched = engine.schedule();
  const double t1 = 1.7, t2 = 2.9;
  engine.advance_state(st, sched.node_at_or_before(t1), 0.0);
  const LagrangianFrame f1 = engine.frame_from_state(st, t1, 0.0);
  CHECK(subspace_gap(f1, engine.sigma_at(0.0, t1)) < 1e-11);
  engine.advance_state(st, sched.node_at_or_before(t2), 0.0);
  const LagrangianFrame f2 = engine.frame_from_state(st, t2, 0.0);
  CHECK(subspace_gap(f2, engine.sigma_at(0.0, t2)) < 1e-11);
}
