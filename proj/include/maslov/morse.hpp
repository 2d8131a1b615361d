#pragma once

// The Morse index of the flow by three independent routes, certified
// against each other:
//   1. conjugate points: signed crossings of the time edge at lambda = 0,
//   2. spectral count: crossings of the lambda edge at t = b, which sit at
//      the negative eigenvalues of the boundary problem,
//   3. finite-dimensional discretizations (three-point finite differences
//      and a piecewise-linear Galerkin matrix of the index form),
// plus a closed homological rectangle in the (t, lambda) strip whose loop
// index must vanish, equating route 1 and route 2 crossing by crossing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "maslov/crossings.hpp"
#include "maslov/errors.hpp"
#include "maslov/jacobi_flow.hpp"
#include "maslov/lagrangian.hpp"
#include "maslov/log.hpp"
#include "maslov/sturm.hpp"

namespace maslov {

struct MorseSettings {
  FlowSettings flow;
  double rank_tol = 1e-8;      // kernel tolerance at localized crossings
  std::size_t mesh = 512;      // finite-difference / Galerkin mesh
  double lambda_margin = 1.0;  // gap below the spectral lower bound
  std::size_t coarse_grid = 512;
  double slope_slack = 0.1;    // time-edge slopes must be <= -1 + slack
  std::uint64_t seed = 0;      // consumed by callers that generate profiles
};

inline void validate_morse_settings(const MorseSettings& s) {
  validate_settings(s.flow);
  if (!(s.rank_tol > 0.0)) throw InvalidSpec("morse settings: rank_tol must be positive");
  if (s.mesh < 8) throw InvalidSpec("morse settings: mesh must be at least 8");
  if (!(s.lambda_margin > 0.0))
    throw InvalidSpec("morse settings: lambda_margin must be positive");
  if (s.coarse_grid < 32) throw InvalidSpec("morse settings: coarse_grid must be at least 32");
  if (!(s.slope_slack >= 0.0 && s.slope_slack < 1.0))
    throw InvalidSpec("morse settings: slope_slack must lie in [0, 1)");
}

struct ConjugateReport {
  std::vector<CrossingEvent> events;  // u_star is the conjugate time
  int total = 0;
  std::size_t nullity_at_b = 0;  // kernel at the far endpoint, not counted
  double a_prime = 0.0;
  double b_prime = 0.0;
};

struct SpectralReport {
  std::vector<CrossingEvent> events;  // u_star is the eigenvalue
  int total = 0;
  double lambda0 = 0.0;
  double mu_hi = 0.0;
};

struct SturmFdReport {
  std::size_t mesh = 0;
  std::size_t negative_count = 0;
  double zero_band = 0.0;
  std::vector<double> eigenvalues;  // the negative ones, ascending (capped)
};

struct RectangleSpec {
  double lambda0 = 0.0;
  double a_prime = 0.0;
  double b_prime = 0.0;
  double lambda_prime = 0.0;
  std::size_t nullity_at_b = 0;
};

struct EdgeSummary {
  std::string name;
  int index = 0;
  double winding = 0.0;
  std::size_t events = 0;
};

struct RectangleReport {
  RectangleSpec spec;
  int residual = 0;  // conjugate-edge index minus spectral-edge index
  double loop_winding = 0.0;
  std::vector<EdgeSummary> edges;
};

struct IndexReport {
  std::size_t n = 0;
  double a = 0.0;
  double b = 0.0;
  ConjugateReport conjugate;
  SpectralReport spectral;
  SturmFdReport sturm_fd;
  std::size_t hessian_negative = 0;
  std::size_t hessian_negative_fine = 0;  // at twice the mesh
  std::size_t hessian_mesh = 0;
  RectangleReport rectangle;
  bool certified = false;
  std::vector<std::string> notes;

  int index() const { return conjugate.total; }
};

// ---------------------------------------------------------------------------
// Endpoint selection.

namespace detail {

/// Data shared by the conjugate, spectral and rectangle constructions.
struct EndpointPlan {
  std::shared_ptr<FlowEngine> engine;
  double a_prime = 0.0;
  double b_prime = 0.0;
  std::size_t nullity_at_b = 0;
  double sup_bound = 1.0;  // upper bound for the operator norm of R - lambda
  double lambda0 = 0.0;
};

inline DetectOptions detect_options(const MorseSettings& s) {
  DetectOptions opt;
  opt.coarse_grid = s.coarse_grid;
  opt.rank_tol = s.rank_tol;
  return opt;
}

/// Shift the endpoints inside the safe radius 0.5 / sqrt(M), within which
/// the frame Q(t) = (t - a)(I + E) stays nonsingular for every lambda in
/// [lambda0, 0], so no crossing can hide between a and a' or between b'
/// and b (other than at b itself).
inline EndpointPlan plan_endpoints(const CurvatureProfile& p, const MorseSettings& s) {
  EndpointPlan plan;
  plan.engine = std::make_shared<FlowEngine>(p, s.flow);
  const double len = p.b - p.a;
  const double lb = lambda_lower_bound(p, s.lambda_margin);
  plan.lambda0 = std::min(-s.lambda_margin, lb);
  plan.sup_bound =
      std::max(1.0, static_cast<double>(p.n) * curvature_sup_norm(p) + std::abs(plan.lambda0));
  const double radius = 0.5 / std::sqrt(plan.sup_bound);
  plan.a_prime = p.a + std::min(radius, len / 64.0);

  const double dip = 1e-4;
  const LagrangianFrame at_b = plan.engine->sigma_at(0.0, p.b);
  for (double sv : vertical_gap_singular_values(at_b))
    if (sv <= dip) ++plan.nullity_at_b;
  plan.b_prime =
      plan.nullity_at_b == 0 ? p.b : p.b - std::min(0.5 * radius, len / 64.0);

  const auto check = [&](double t, const char* which) {
    const double sv =
        vertical_gap_singular_values(plan.engine->sigma_at(0.0, t)).front();
    if (sv <= dip)
      throw NumericalFailure(std::string("endpoint selection failed: sigma at ") + which +
                             " = " + std::to_string(t) + " still meets the train");
  };
  check(plan.a_prime, "a'");
  if (plan.nullity_at_b > 0) check(plan.b_prime, "b'");
  return plan;
}

/// Upper endpoint of the spectral edge: 0 when the boundary problem has no
/// kernel, otherwise a small negative shift pushed until the frame is
/// uniformly clear of the train.
inline double select_mu_hi(const EndpointPlan& plan, const CurvatureProfile& p) {
  if (plan.nullity_at_b == 0) return 0.0;
  const double dip = 1e-4;
  double mu = -1e-4 * std::max(1.0, std::abs(plan.lambda0));
  for (int trial = 0; trial < 16; ++trial) {
    const double sv =
        vertical_gap_singular_values(plan.engine->sigma_at(mu, p.b)).front();
    if (sv > 10.0 * dip) return mu;
    mu *= 2.0;
    if (mu < 0.25 * plan.lambda0)
      break;  // would start eating into the genuine spectrum
  }
  throw NumericalFailure("could not separate the kernel at b from the negative spectrum");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Route 1: conjugate points.

inline ConjugateReport conjugate_points(const CurvatureProfile& p, const MorseSettings& s = {}) {
  validate_profile(p);
  validate_morse_settings(s);
  const detail::EndpointPlan plan = detail::plan_endpoints(p, s);
  const LagrangianPath path = make_t_edge(plan.engine, 0.0, plan.a_prime, plan.b_prime);

  ConjugateReport rep;
  rep.a_prime = plan.a_prime;
  rep.b_prime = plan.b_prime;
  rep.nullity_at_b = plan.nullity_at_b;
  rep.events = detect_crossings(path, detail::detect_options(s));
  for (const auto& ev : rep.events) {
    if (!crossing_slope_check(ev, s.slope_slack))
      throw NumericalFailure("conjugate crossing at t = " + std::to_string(ev.u_star) +
                             " violates the time-edge slope bound");
    rep.total += ev.signed_contribution;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Route 2: spectral crossings on the lambda edge.

inline SpectralReport spectral_count(const CurvatureProfile& p, const MorseSettings& s = {}) {
  validate_profile(p);
  validate_morse_settings(s);
  const detail::EndpointPlan plan = detail::plan_endpoints(p, s);

  SpectralReport rep;
  rep.lambda0 = plan.lambda0;
  rep.mu_hi = detail::select_mu_hi(plan, p);
  const LagrangianPath edge = make_lambda_edge(plan.engine, p.b, rep.lambda0, rep.mu_hi);
  rep.events = detect_crossings(edge, detail::detect_options(s));
  for (const auto& ev : rep.events) {
    for (int sign : ev.direction_signs)
      if (sign <= 0)
        throw NumericalFailure("spectral crossing at mu = " + std::to_string(ev.u_star) +
                               " does not move monotonically across the train");
    rep.total += ev.signed_contribution;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Route 3: finite-dimensional discretizations.

/// Width of the spectral band around zero treated as the discretization
/// image of an exact kernel; only applied when the boundary problem is
/// known to be degenerate at b.
inline double fd_zero_band(const CurvatureProfile& p, std::size_t mesh, bool degenerate_at_b) {
  if (!degenerate_at_b) return 0.0;
  const double h = (p.b - p.a) / static_cast<double>(mesh);
  return 10.0 * h * h *
         std::max(1.0, static_cast<double>(p.n) * curvature_sup_norm(p));
}

inline SturmFdReport sl_eigs_fd(const CurvatureProfile& p, std::size_t mesh,
                                double zero_band = 0.0) {
  validate_profile(p);
  SturmFdReport rep;
  rep.mesh = mesh;
  rep.zero_band = zero_band;
  const BlockTridiag t = sl_fd_matrix(p, mesh);
  rep.negative_count = count_below(t, -zero_band);
  const std::size_t listed = std::min<std::size_t>(rep.negative_count, 16);
  if (listed > 0) rep.eigenvalues = smallest_eigenvalues(t, listed);
  return rep;
}

inline std::size_t hessian_index_fd(const CurvatureProfile& p, std::size_t mesh,
                                    double zero_band = 0.0) {
  validate_profile(p);
  const BlockTridiag k = hessian_fd_matrix(p, mesh);
  // The Galerkin matrix represents the form against unnormalized hats, so
  // an operator-scale band shrinks by the element width.
  const double h = (p.b - p.a) / static_cast<double>(mesh);
  return count_below(k, -zero_band * h);
}

// ---------------------------------------------------------------------------
// The homological rectangle.

inline RectangleReport rectangle_check(const CurvatureProfile& p, const MorseSettings& s = {}) {
  validate_profile(p);
  validate_morse_settings(s);
  const detail::EndpointPlan plan = detail::plan_endpoints(p, s);
  const DetectOptions opt = detail::detect_options(s);

  RectangleReport rep;
  rep.spec.lambda0 = plan.lambda0;
  rep.spec.a_prime = plan.a_prime;
  rep.spec.b_prime = plan.b_prime;
  rep.spec.nullity_at_b = plan.nullity_at_b;

  // The corner height lambda' must separate the kernel at b (if any) from
  // the negative spectrum: halfway to the crossing nearest zero.
  const double mu_hi = detail::select_mu_hi(plan, p);
  const LagrangianPath probe = make_lambda_edge(plan.engine, p.b, plan.lambda0, mu_hi);
  const auto spectral_events = detect_crossings(probe, opt);
  rep.spec.lambda_prime =
      spectral_events.empty() ? 0.5 * plan.lambda0 : 0.5 * spectral_events.back().u_star;

  const LagrangianFrame corner_top = plan.engine->sigma_at(0.0, plan.b_prime);
  const LagrangianFrame corner_right = plan.engine->sigma_at(rep.spec.lambda_prime, p.b);

  std::vector<LagrangianPath> edges;
  edges.push_back(make_t_edge(plan.engine, 0.0, plan.a_prime, plan.b_prime));
  edges.push_back(
      make_chart_line(to_chart(corner_top, {}).S, to_chart(corner_right, {}).S));
  edges.push_back(make_lambda_edge(plan.engine, p.b, rep.spec.lambda_prime, plan.lambda0));
  edges.push_back(make_t_edge(plan.engine, plan.lambda0, p.b, plan.a_prime));
  edges.push_back(make_lambda_edge(plan.engine, plan.a_prime, plan.lambda0, 0.0));

  const char* names[] = {"conjugate", "corner", "spectral-down", "bottom", "left"};
  for (std::size_t i = 0; i < edges.size(); ++i) {
    EdgeSummary sum;
    sum.name = names[i];
    const auto events = detect_crossings(edges[i], opt);
    sum.events = events.size();
    std::vector<double> anchors;
    anchors.reserve(events.size());
    for (const auto& ev : events) {
      sum.index += ev.signed_contribution;
      anchors.push_back(ev.u_star);
    }
    sum.winding = winding_det2(edges[i], 256, nullptr, anchors);
    rep.edges.push_back(std::move(sum));
  }
  if (rep.edges[1].events != 0)
    throw NumericalFailure("rectangle corner arc unexpectedly meets the train");
  if (rep.edges[3].events != 0 || rep.edges[4].events != 0)
    throw NumericalFailure(
        "rectangle bottom or left edge meets the train below the spectral bound");

  rep.residual = loop_index(edges, opt, &rep.loop_winding);
  return rep;
}

// ---------------------------------------------------------------------------
// The full certified report.

inline IndexReport morse_report(const CurvatureProfile& p, const MorseSettings& s = {}) {
  validate_profile(p);
  validate_morse_settings(s);

  IndexReport rep;
  rep.n = p.n;
  rep.a = p.a;
  rep.b = p.b;
  rep.conjugate = conjugate_points(p, s);
  rep.spectral = spectral_count(p, s);

  const double band = fd_zero_band(p, s.mesh, rep.conjugate.nullity_at_b > 0);
  rep.sturm_fd = sl_eigs_fd(p, s.mesh, band);
  rep.hessian_mesh = s.mesh;
  rep.hessian_negative = hessian_index_fd(p, s.mesh, band);
  const double band_fine = fd_zero_band(p, 2 * s.mesh, rep.conjugate.nullity_at_b > 0);
  rep.hessian_negative_fine = hessian_index_fd(p, 2 * s.mesh, band_fine);
  rep.rectangle = rectangle_check(p, s);

  const int want = rep.conjugate.total;
  auto expect = [&](bool ok, const std::string& msg) {
    if (!ok) rep.notes.push_back(msg);
  };
  expect(rep.spectral.total == want,
         "spectral count " + std::to_string(rep.spectral.total) + " != conjugate count " +
             std::to_string(want));
  expect(static_cast<int>(rep.sturm_fd.negative_count) == want,
         "finite-difference negative count " + std::to_string(rep.sturm_fd.negative_count) +
             " != conjugate count " + std::to_string(want));
  expect(static_cast<int>(rep.hessian_negative) == want,
         "Galerkin index " + std::to_string(rep.hessian_negative) + " != conjugate count " +
             std::to_string(want));
  expect(rep.hessian_negative_fine == rep.hessian_negative,
         "Galerkin index not stable under mesh refinement: " +
             std::to_string(rep.hessian_negative) + " vs " +
             std::to_string(rep.hessian_negative_fine));
  expect(rep.rectangle.residual == 0,
         "rectangle residual " + std::to_string(rep.rectangle.residual) + " is nonzero");
  rep.certified = rep.notes.empty();
  if (!rep.certified)
    log_info("certification failed: " + rep.notes.front());
  return rep;
}

}  // namespace maslov
