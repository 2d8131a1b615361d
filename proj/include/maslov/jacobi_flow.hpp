#pragma once

// Curvature profiles R(t) on an interval [a, b] and a fixed-step order-4
// integrator for the shifted linear Hamiltonian system
//
//     Y'(t) = A(t, lambda) Y(t),      A = [[0, I], [R(t) - lambda I, 0]],
//
// transporting Lagrangian frames (2n x n) or fundamental solutions (2n x 2n)
// along the interval.  Frames are re-orthonormalized periodically -- this
// preserves the spanned subspace, which is the only datum consumed
// downstream -- and the symplectic drift max|M^T J M| is monitored against a
// hard tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "maslov/errors.hpp"
#include "maslov/lagrangian.hpp"
#include "maslov/numkernel.hpp"

namespace maslov {

// ---------------------------------------------------------------------------
// Profiles.

enum class ProfileKind {
  Constant,
  DiagonalConstant,
  PiecewiseConstant,
  PolynomialEntries,
  SampledLinearInterp,
};

inline const char* kind_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::DiagonalConstant: return "diagonal-constant";
    case ProfileKind::PiecewiseConstant: return "piecewise-constant";
    case ProfileKind::PolynomialEntries: return "polynomial-entries";
    case ProfileKind::SampledLinearInterp: return "sampled-linear-interp";
  }
  return "unknown";
}

inline ProfileKind kind_from_name(const std::string& s) {
  if (s == "constant") return ProfileKind::Constant;
  if (s == "diagonal-constant") return ProfileKind::DiagonalConstant;
  if (s == "piecewise-constant") return ProfileKind::PiecewiseConstant;
  if (s == "polynomial-entries") return ProfileKind::PolynomialEntries;
  if (s == "sampled-linear-interp") return ProfileKind::SampledLinearInterp;
  throw InvalidSpec("unknown profile kind: " + s);
}

/// Symmetric matrix family R(t) on [a, b].  Only the payload matching `kind`
/// is meaningful.  Build through the make_* factories below, which validate
/// and normalize; direct aggregate construction must satisfy
/// validate_profile exactly.
struct CurvatureProfile {
  ProfileKind kind = ProfileKind::Constant;
  std::size_t n = 0;
  double a = 0.0;
  double b = 1.0;

  RealMatrix constant;                  // Constant
  std::vector<double> diagonal;         // DiagonalConstant
  std::vector<double> breakpoints;      // PiecewiseConstant: a = t0 < ... < tm = b
  std::vector<RealMatrix> pieces;       //   value on [t_k, t_{k+1})
  std::vector<RealMatrix> poly_coeffs;  // PolynomialEntries: ascending powers of t
  std::vector<double> sample_times;     // SampledLinearInterp: a = s0 < ... < sm = b
  std::vector<RealMatrix> samples;      //   value at s_k, linear in between
};

namespace detail {

inline void require_symmetric_payload(const RealMatrix& m, std::size_t n,
                                      const char* what) {
  if (!m.square() || m.rows != n)
    throw InvalidSpec(std::string(what) + ": expected " + std::to_string(n) + " x " +
                       std::to_string(n) + " matrix");
  if (asymmetry(m) > 1e-12 * std::max(1.0, max_abs(m)))
    throw InvalidSpec(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

inline void validate_profile(const CurvatureProfile& p) {
  if (p.n == 0) throw InvalidSpec("profile: n must be positive");
  if (!(p.a < p.b)) throw InvalidSpec("profile: requires a < b");
  switch (p.kind) {
    case ProfileKind::Constant:
      detail::require_symmetric_payload(p.constant, p.n, "profile(constant)");
      break;
    case ProfileKind::DiagonalConstant:
      if (p.diagonal.size() != p.n)
        throw InvalidSpec("profile(diagonal-constant): diagonal length != n");
      break;
    case ProfileKind::PiecewiseConstant: {
      if (p.breakpoints.size() < 2 || p.pieces.size() + 1 != p.breakpoints.size())
        throw InvalidSpec("profile(piecewise-constant): need m+1 breakpoints for m pieces");
      if (p.breakpoints.front() != p.a || p.breakpoints.back() != p.b)
        throw InvalidSpec("profile(piecewise-constant): breakpoints must span [a, b]");
      for (std::size_t i = 0; i + 1 < p.breakpoints.size(); ++i)
        if (!(p.breakpoints[i] < p.breakpoints[i + 1]))
          throw InvalidSpec("profile(piecewise-constant): breakpoints not increasing");
      for (const auto& m : p.pieces)
        detail::require_symmetric_payload(m, p.n, "profile(piecewise-constant)");
      break;
    }
    case ProfileKind::PolynomialEntries:
      if (p.poly_coeffs.empty())
        throw InvalidSpec("profile(polynomial-entries): need at least one coefficient");
      for (const auto& m : p.poly_coeffs)
        detail::require_symmetric_payload(m, p.n, "profile(polynomial-entries)");
      break;
    case ProfileKind::SampledLinearInterp: {
      if (p.sample_times.size() < 2 || p.samples.size() != p.sample_times.size())
        throw InvalidSpec("profile(sampled-linear-interp): need matching times/samples, >= 2");
      if (p.sample_times.front() != p.a || p.sample_times.back() != p.b)
        throw InvalidSpec("profile(sampled-linear-interp): sample times must span [a, b]");
      for (std::size_t i = 0; i + 1 < p.sample_times.size(); ++i)
        if (!(p.sample_times[i] < p.sample_times[i + 1]))
          throw InvalidSpec("profile(sampled-linear-interp): times not increasing");
      for (const auto& m : p.samples)
        detail::require_symmetric_payload(m, p.n, "profile(sampled-linear-interp)");
      break;
    }
  }
}

inline CurvatureProfile make_constant_profile(std::size_t n, double a, double b,
                                              RealMatrix r) {
  detail::require_symmetric_payload(r, n, "make_constant_profile");
  CurvatureProfile p;
  p.kind = ProfileKind::Constant;
  p.n = n;
  p.a = a;
  p.b = b;
  p.constant = symmetrized(r);
  validate_profile(p);
  return p;
}

inline CurvatureProfile make_diagonal_profile(double a, double b,
                                              std::vector<double> diag) {
  CurvatureProfile p;
  p.kind = ProfileKind::DiagonalConstant;
  p.n = diag.size();
  p.a = a;
  p.b = b;
  p.diagonal = std::move(diag);
  validate_profile(p);
  return p;
}

inline CurvatureProfile make_piecewise_profile(std::size_t n, std::vector<double> breakpoints,
                                               std::vector<RealMatrix> pieces) {
  for (const auto& m : pieces) detail::require_symmetric_payload(m, n, "make_piecewise_profile");
  CurvatureProfile p;
  p.kind = ProfileKind::PiecewiseConstant;
  p.n = n;
  if (breakpoints.size() >= 2) {
    p.a = breakpoints.front();
    p.b = breakpoints.back();
  }
  p.breakpoints = std::move(breakpoints);
  p.pieces.reserve(pieces.size());
  for (auto& m : pieces) p.pieces.push_back(symmetrized(m));
  validate_profile(p);
  return p;
}

inline CurvatureProfile make_polynomial_profile(std::size_t n, double a, double b,
                                                std::vector<RealMatrix> coeffs) {
  CurvatureProfile p;
  p.kind = ProfileKind::PolynomialEntries;
  p.n = n;
  p.a = a;
  p.b = b;
  for (const auto& m : coeffs) detail::require_symmetric_payload(m, n, "make_polynomial_profile");
  p.poly_coeffs.reserve(coeffs.size());
  for (auto& m : coeffs) p.poly_coeffs.push_back(symmetrized(m));
  validate_profile(p);
  return p;
}

inline CurvatureProfile make_sampled_profile(std::size_t n, std::vector<double> times,
                                             std::vector<RealMatrix> values) {
  CurvatureProfile p;
  p.kind = ProfileKind::SampledLinearInterp;
  p.n = n;
  if (times.size() >= 2) {
    p.a = times.front();
    p.b = times.back();
  }
  p.sample_times = std::move(times);
  for (const auto& m : values) detail::require_symmetric_payload(m, n, "make_sampled_profile");
  p.samples.reserve(values.size());
  for (auto& m : values) p.samples.push_back(symmetrized(m));
  validate_profile(p);
  return p;
}

namespace detail {

inline void check_in_domain(const CurvatureProfile& p, double t) {
  const double slack = 1e-9 * std::max({1.0, std::abs(p.a), std::abs(p.b)});
  if (t < p.a - slack || t > p.b + slack)
    throw ProfileDomain("time " + std::to_string(t) + " outside profile domain [" +
                        std::to_string(p.a) + ", " + std::to_string(p.b) + "]");
}

/// Index of the piece/segment containing t: breakpoints get the segment to
/// their right, except b which belongs to the last segment.
inline std::size_t segment_index(const std::vector<double>& knots, double t) {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return 0;
  std::size_t idx = static_cast<std::size_t>(it - knots.begin()) - 1;
  if (idx + 1 >= knots.size()) idx = knots.size() - 2;  // t >= b: last segment
  return idx;
}

}  // namespace detail

/// Evaluates R(t).  Assumes a validated profile; throws ProfileDomain when t
/// lies outside [a, b] (up to a relative 1e-9 slack, then clamped).
inline RealMatrix curvature_at(const CurvatureProfile& p, double t) {
  detail::check_in_domain(p, t);
  t = std::clamp(t, p.a, p.b);
  switch (p.kind) {
    case ProfileKind::Constant:
      return p.constant;
    case ProfileKind::DiagonalConstant:
      return diag_matrix(p.diagonal);
    case ProfileKind::PiecewiseConstant:
      return p.pieces[detail::segment_index(p.breakpoints, t)];
    case ProfileKind::PolynomialEntries: {
      RealMatrix acc = p.poly_coeffs.back();
      for (std::size_t k = p.poly_coeffs.size() - 1; k-- > 0;)
        acc = t * acc + p.poly_coeffs[k];
      return acc;
    }
    case ProfileKind::SampledLinearInterp: {
      const std::size_t i = detail::segment_index(p.sample_times, t);
      const double t0 = p.sample_times[i], t1 = p.sample_times[i + 1];
      const double w = (t - t0) / (t1 - t0);
      return (1.0 - w) * p.samples[i] + w * p.samples[i + 1];
    }
  }
  throw InvalidSpec("curvature_at: unknown profile kind");
}

/// Full system matrix A(t, lambda) = [[0, I], [R(t) - lambda I, 0]] (2n x 2n).
inline RealMatrix coefficient(const CurvatureProfile& p, double t, double lambda) {
  const RealMatrix r = curvature_at(p, t);
  const std::size_t n = p.n;
  RealMatrix a(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, n + i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) a(n + i, j) = r(i, j) - (i == j ? lambda : 0.0);
  }
  return a;
}

/// Upper bound for sup over t of max |R_ij(t)|.  Exact for constant,
/// diagonal, piecewise and sampled kinds (entries are affine between
/// nodes); polynomial entries are densely sampled.
inline double curvature_sup_norm(const CurvatureProfile& p) {
  double hi = 0.0;
  switch (p.kind) {
    case ProfileKind::Constant:
      hi = max_abs(p.constant);
      break;
    case ProfileKind::DiagonalConstant:
      for (double d : p.diagonal) hi = std::max(hi, std::abs(d));
      break;
    case ProfileKind::PiecewiseConstant:
      for (const auto& m : p.pieces) hi = std::max(hi, max_abs(m));
      break;
    case ProfileKind::SampledLinearInterp:
      for (const auto& m : p.samples) hi = std::max(hi, max_abs(m));
      break;
    case ProfileKind::PolynomialEntries: {
      const std::size_t count = std::max<std::size_t>(
          2, static_cast<std::size_t>(16.0 * 4096.0 * (p.b - p.a)));
      for (std::size_t k = 0; k <= count; ++k) {
        const double t = p.a + (p.b - p.a) * static_cast<double>(k) / static_cast<double>(count);
        hi = std::max(hi, max_abs(curvature_at(p, t)));
      }
      break;
    }
  }
  return hi;
}

/// Lower bound for the spectrum of the associated second-order operator:
/// (min over t of the smallest eigenvalue of R(t)) - margin.  For constant,
/// diagonal and piecewise kinds the minimum is exact; for sampled profiles
/// the node minimum is exact because the smallest eigenvalue is concave
/// along the linear interpolation; polynomial entries fall back to a dense
/// sample at 16x the default step density.
inline double lambda_lower_bound(const CurvatureProfile& p, double margin) {
  if (!(margin > 0.0)) throw InvalidInput("lambda_lower_bound: margin must be positive");
  auto min_eig = [](const RealMatrix& m) {
    return sym_eig(symmetrized(m)).eigenvalues.front();
  };
  double lo = 0.0;
  switch (p.kind) {
    case ProfileKind::Constant:
      lo = min_eig(p.constant);
      break;
    case ProfileKind::DiagonalConstant:
      lo = *std::min_element(p.diagonal.begin(), p.diagonal.end());
      break;
    case ProfileKind::PiecewiseConstant: {
      lo = min_eig(p.pieces.front());
      for (const auto& m : p.pieces) lo = std::min(lo, min_eig(m));
      break;
    }
    case ProfileKind::SampledLinearInterp: {
      lo = min_eig(p.samples.front());
      for (const auto& m : p.samples) lo = std::min(lo, min_eig(m));
      break;
    }
    case ProfileKind::PolynomialEntries: {
      const std::size_t count = std::max<std::size_t>(
          2, static_cast<std::size_t>(16.0 * 4096.0 * (p.b - p.a)));
      lo = min_eig(curvature_at(p, p.a));
      for (std::size_t k = 1; k <= count; ++k) {
        const double t = p.a + (p.b - p.a) * static_cast<double>(k) / static_cast<double>(count);
        lo = std::min(lo, min_eig(curvature_at(p, t)));
      }
      break;
    }
  }
  return lo - margin;
}

// ---------------------------------------------------------------------------
// Settings and schedule.

struct FlowSettings {
  std::size_t steps = 4096;  // per unit of parameter time
  std::size_t renormalize_every = 64;
  double drift_tol = 1e-6;
};

inline void validate_settings(const FlowSettings& s) {
  if (s.steps < 16) throw InvalidSpec("flow settings: steps must be >= 16 per unit");
  if (s.renormalize_every == 0)
    throw InvalidSpec("flow settings: renormalize_every must be positive");
  if (!(s.drift_tol > 0.0)) throw InvalidSpec("flow settings: drift_tol must be positive");
}

namespace detail {

/// Fixed integration grid over [a, b], aligned so no step straddles a
/// profile breakpoint (or a sample node: keeps the integrand smooth within
/// every step, preserving order 4).
struct StepSchedule {
  std::vector<double> nodes;  // nodes[0] = a < ... < nodes[N] = b

  std::size_t steps() const { return nodes.size() - 1; }

  /// Last node with nodes[i] <= t (clamped into [0, steps()]).
  std::size_t node_at_or_before(double t) const {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
    if (it == nodes.begin()) return 0;
    return static_cast<std::size_t>(it - nodes.begin()) - 1;
  }
};

inline StepSchedule make_schedule(const CurvatureProfile& p, const FlowSettings& s) {
  std::vector<double> hard;
  switch (p.kind) {
    case ProfileKind::PiecewiseConstant: hard = p.breakpoints; break;
    case ProfileKind::SampledLinearInterp: hard = p.sample_times; break;
    default: hard = {p.a, p.b}; break;
  }
  StepSchedule out;
  out.nodes.push_back(p.a);
  for (std::size_t seg = 0; seg + 1 < hard.size(); ++seg) {
    const double t0 = hard[seg], t1 = hard[seg + 1];
    const double len = t1 - t0;
    const std::size_t m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(len * static_cast<double>(s.steps) - 1e-9)));
    for (std::size_t q = 1; q <= m; ++q)
      out.nodes.push_back(q == m ? t1 : t0 + len * static_cast<double>(q) / static_cast<double>(m));
  }
  return out;
}

/// R(t) cached at the begin/mid/end nodes of every scheduled step, shared by
/// all lambda values (the shift enters the stepper separately).  Piecewise
/// profiles evaluate all three nodes on the step midpoint's piece, so the
/// one-sided limits at breakpoints never leak into a neighboring step.
struct CoefficientTable {
  std::size_t n = 0;
  std::vector<double> data;  // steps * 3 * n^2, row-major per matrix

  const double* at(std::size_t step, std::size_t which) const {
    return data.data() + (step * 3 + which) * n * n;
  }

  static CoefficientTable build(const CurvatureProfile& p, const StepSchedule& sched) {
    CoefficientTable t;
    t.n = p.n;
    const std::size_t nn = p.n * p.n;
    t.data.resize(sched.steps() * 3 * nn);
    for (std::size_t k = 0; k < sched.steps(); ++k) {
      const double t0 = sched.nodes[k], t1 = sched.nodes[k + 1];
      const double mid = 0.5 * (t0 + t1);
      RealMatrix r0, rm, r1;
      if (p.kind == ProfileKind::PiecewiseConstant) {
        r0 = rm = r1 = curvature_at(p, mid);
      } else {
        r0 = curvature_at(p, t0);
        rm = curvature_at(p, mid);
        r1 = curvature_at(p, t1);
      }
      std::copy(r0.data.begin(), r0.data.end(), t.data.begin() + (k * 3 + 0) * nn);
      std::copy(rm.data.begin(), rm.data.end(), t.data.begin() + (k * 3 + 1) * nn);
      std::copy(r1.data.begin(), r1.data.end(), t.data.begin() + (k * 3 + 2) * nn);
    }
    return t;
  }
};

/// Scratch buffers for one integration pass over matrices with `cols`
/// columns (n for frames, 2n for fundamental solutions).
struct FlowWorkspace {
  std::vector<double> k1, k2, k3, k4, tmp;

  explicit FlowWorkspace(std::size_t n, std::size_t cols) {
    const std::size_t sz = 2 * n * cols;
    k1.resize(sz);
    k2.resize(sz);
    k3.resize(sz);
    k4.resize(sz);
    tmp.resize(sz);
  }
};

/// out = A(r, lambda) * in for the block matrix A = [[0, I], [r - lambda, 0]]
/// acting on a 2n x cols matrix stored row-major.
inline void apply_system(const double* r, double lambda, std::size_t n, std::size_t cols,
                         const double* in, double* out) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = in[(n + i) * cols + j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = -lambda * in[i * cols + j];
      for (std::size_t k = 0; k < n; ++k) acc += r[i * n + k] * in[k * cols + j];
      out[(n + i) * cols + j] = acc;
    }
}

/// One classical order-4 step of size h from the state m, with the
/// coefficient matrix sampled at the step's begin/mid/end.
inline void rk4_step(std::vector<double>& m, double h, const double* r_begin,
                     const double* r_mid, const double* r_end, double lambda, std::size_t n,
                     std::size_t cols, FlowWorkspace& ws) {
  const std::size_t sz = m.size();
  apply_system(r_begin, lambda, n, cols, m.data(), ws.k1.data());
  for (std::size_t i = 0; i < sz; ++i) ws.tmp[i] = m[i] + 0.5 * h * ws.k1[i];
  apply_system(r_mid, lambda, n, cols, ws.tmp.data(), ws.k2.data());
  for (std::size_t i = 0; i < sz; ++i) ws.tmp[i] = m[i] + 0.5 * h * ws.k2[i];
  apply_system(r_mid, lambda, n, cols, ws.tmp.data(), ws.k3.data());
  for (std::size_t i = 0; i < sz; ++i) ws.tmp[i] = m[i] + h * ws.k3[i];
  apply_system(r_end, lambda, n, cols, ws.tmp.data(), ws.k4.data());
  for (std::size_t i = 0; i < sz; ++i)
    m[i] += (h / 6.0) * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
}

/// max |M^T J M| for a 2n x n frame stored row-major: entry (i, j) is
/// sum_k P(k,i) Q(k,j) - Q(k,i) P(k,j).
inline double frame_drift(const std::vector<double>& m, std::size_t n) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += m[(n + k) * n + i] * m[k * n + j] - m[k * n + i] * m[(n + k) * n + j];
      worst = std::max(worst, std::abs(acc));
    }
  // Diagonal entries vanish identically; only i < j carries information.
  return worst;
}

/// In-place modified Gram-Schmidt on the n columns of a 2n x n frame; two
/// passes for stability.  Spans are preserved exactly.
inline void renormalize_frame(std::vector<double>& m, std::size_t n) {
  const std::size_t rows = 2 * n;
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) {
        double c = 0.0;
        for (std::size_t r = 0; r < rows; ++r) c += m[r * n + j] * m[r * n + i];
        for (std::size_t r = 0; r < rows; ++r) m[r * n + j] -= c * m[r * n + i];
      }
    double nrm = 0.0;
    for (std::size_t r = 0; r < rows; ++r) nrm += m[r * n + j] * m[r * n + j];
    nrm = std::sqrt(nrm);
    if (nrm < 1e-200) throw NumericalFailure("flow frame collapsed during renormalization");
    for (std::size_t r = 0; r < rows; ++r) m[r * n + j] /= nrm;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Engine.

/// Frame state pinned to a schedule node; the basis is whatever the
/// renormalization cadence produced (the span is the meaningful datum).
struct FrameState {
  std::size_t node = 0;
  std::vector<double> m;  // 2n x n row-major
  double drift = 0.0;
};

/// Integrator bound to one validated (profile, settings) pair.  Immutable
/// after construction; all methods are const and safe to call concurrently.
class FlowEngine {
 public:
  FlowEngine(CurvatureProfile profile, FlowSettings settings)
      : profile_(std::move(profile)), settings_(settings) {
    validate_profile(profile_);
    validate_settings(settings_);
    schedule_ = detail::make_schedule(profile_, settings_);
    table_ = detail::CoefficientTable::build(profile_, schedule_);
  }

  const CurvatureProfile& profile() const { return profile_; }
  const FlowSettings& settings() const { return settings_; }
  const detail::StepSchedule& schedule() const { return schedule_; }

  /// sigma transported from a, pinned at schedule node 0.
  FrameState start_state() const {
    FrameState st;
    st.node = 0;
    st.m.assign(2 * profile_.n * profile_.n, 0.0);
    for (std::size_t i = 0; i < profile_.n; ++i) st.m[(profile_.n + i) * profile_.n + i] = 1.0;
    return st;
  }

  /// Advances the state along schedule nodes (forward only), renormalizing
  /// on cadence and accumulating drift.  Throws NumericalFailure when the
  /// drift tolerance is exceeded.
  void advance_state(FrameState& st, std::size_t target_node, double lambda) const {
    if (target_node > schedule_.steps())
      throw InvalidInput("advance_state: node index out of range");
    if (target_node < st.node)
      throw InvalidInput("advance_state: target node precedes the state");
    detail::FlowWorkspace ws(profile_.n, profile_.n);
    run_nodes(st, st.node, target_node, lambda, ws);
    st.node = target_node;
    check_drift(st, schedule_.nodes[target_node]);
  }

  /// Frame at an arbitrary t >= the state's node time, within one step of
  /// it: a single direct step off the cached grid.  Non-mutating.
  LagrangianFrame frame_from_state(const FrameState& st, double t, double lambda) const {
    const std::size_t n = profile_.n;
    const double t0 = schedule_.nodes[st.node];
    std::vector<double> m = st.m;
    if (t != t0) {
      detail::FlowWorkspace ws(n, n);
      partial_step(m, t0, t, lambda, n, n, ws);
      FrameState probe;
      probe.m = m;
      probe.drift = st.drift;
      check_drift(probe, t);
    }
    RealMatrix out(2 * n, n);
    out.data = std::move(m);
    return LagrangianFrame(n, std::move(out));
  }

  /// sigma_lambda(t): transport sigma from a to t.  Fresh pass each call.
  LagrangianFrame sigma_at(double lambda, double t, double* drift_out = nullptr) const {
    detail::check_in_domain(profile_, t);
    t = std::clamp(t, profile_.a, profile_.b);
    FrameState st = start_state();
    advance_state(st, schedule_.node_at_or_before(t), lambda);
    LagrangianFrame f = frame_from_state(st, t, lambda);
    if (drift_out) *drift_out = st.drift;
    return f;
  }

  /// General transport of an arbitrary frame between two times (either
  /// direction).  Off-grid ends are handled by single direct steps.
  LagrangianFrame transport(const LagrangianFrame& start, double t0, double t1, double lambda,
                            double* drift_out = nullptr) const {
    if (start.n != profile_.n) throw InvalidInput("transport: frame dimension mismatch");
    detail::check_in_domain(profile_, t0);
    detail::check_in_domain(profile_, t1);
    t0 = std::clamp(t0, profile_.a, profile_.b);
    t1 = std::clamp(t1, profile_.a, profile_.b);
    const std::size_t n = profile_.n;
    std::vector<double> m = start.m.data;
    detail::FlowWorkspace ws(n, n);
    FrameState st;  // used only as a drift carrier
    st.m = std::move(m);

    if (t1 >= t0) {
      // enter the grid at the first node >= t0
      std::size_t k0 = schedule_.node_at_or_before(t0);
      if (schedule_.nodes[k0] < t0) ++k0;
      if (k0 > schedule_.steps() || schedule_.nodes[k0] > t1) {
        partial_step(st.m, t0, t1, lambda, n, n, ws);  // both ends inside one step
        check_drift(st, t1);
      } else {
        partial_step(st.m, t0, schedule_.nodes[k0], lambda, n, n, ws);
        std::size_t k1 = schedule_.node_at_or_before(t1);
        run_nodes(st, k0, k1, lambda, ws);
        partial_step(st.m, schedule_.nodes[k1], t1, lambda, n, n, ws);
        check_drift(st, t1);
      }
    } else {
      // backward: enter at the last node <= t0
      std::size_t k0 = schedule_.node_at_or_before(t0);
      if (schedule_.nodes[k0] < t1) {
        partial_step(st.m, t0, t1, lambda, n, n, ws);
        check_drift(st, t1);
      } else {
        partial_step(st.m, t0, schedule_.nodes[k0], lambda, n, n, ws);
        std::size_t k1 = schedule_.node_at_or_before(t1);
        if (schedule_.nodes[k1] < t1) ++k1;  // first node >= t1
        run_nodes(st, k0, k1, lambda, ws);
        partial_step(st.m, schedule_.nodes[k1], t1, lambda, n, n, ws);
        check_drift(st, t1);
      }
    }
    if (drift_out) *drift_out = st.drift;
    RealMatrix out(2 * n, n);
    out.data = std::move(st.m);
    return LagrangianFrame(n, std::move(out));
  }

 private:
  void check_drift(FrameState& st, double at_time) const {
    st.drift = std::max(st.drift, detail::frame_drift(st.m, profile_.n));
    if (st.drift > settings_.drift_tol) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", st.drift);
      throw NumericalFailure("symplectic drift " + std::string(buf) +
                             " exceeds tolerance near t = " + std::to_string(at_time));
    }
  }

  /// Single off-grid step t0 -> t1 with direct coefficient evaluation.  For
  /// piecewise profiles all three samples use the midpoint's piece,
  /// mirroring the cached-table convention.
  void partial_step(std::vector<double>& m, double t0, double t1, double lambda, std::size_t n,
                    std::size_t cols, detail::FlowWorkspace& ws) const {
    if (t0 == t1) return;
    const double mid = 0.5 * (t0 + t1);
    RealMatrix r0, rm, r1;
    if (profile_.kind == ProfileKind::PiecewiseConstant) {
      r0 = rm = r1 = curvature_at(profile_, mid);
    } else {
      r0 = curvature_at(profile_, t0);
      rm = curvature_at(profile_, mid);
      r1 = curvature_at(profile_, t1);
    }
    detail::rk4_step(m, t1 - t0, r0.data.data(), rm.data.data(), r1.data.data(), lambda, n,
                     cols, ws);
  }

  /// Node-to-node run in either direction with renormalization cadence.
  void run_nodes(FrameState& st, std::size_t from, std::size_t to, double lambda,
                 detail::FlowWorkspace& ws) const {
    const std::size_t n = profile_.n;
    std::size_t since_renorm = 0;
    auto maybe_renorm = [&](double at_time) {
      if (++since_renorm >= settings_.renormalize_every) {
        since_renorm = 0;
        check_drift(st, at_time);
        detail::renormalize_frame(st.m, n);
      }
    };
    if (to >= from) {
      for (std::size_t k = from; k < to; ++k) {
        const double h = schedule_.nodes[k + 1] - schedule_.nodes[k];
        detail::rk4_step(st.m, h, table_.at(k, 0), table_.at(k, 1), table_.at(k, 2), lambda, n,
                         n, ws);
        maybe_renorm(schedule_.nodes[k + 1]);
      }
    } else {
      for (std::size_t k = from; k-- > to;) {
        const double h = schedule_.nodes[k] - schedule_.nodes[k + 1];  // negative
        detail::rk4_step(st.m, h, table_.at(k, 2), table_.at(k, 1), table_.at(k, 0), lambda, n,
                         n, ws);
        maybe_renorm(schedule_.nodes[k]);
      }
    }
  }

  CurvatureProfile profile_;
  FlowSettings settings_;
  detail::StepSchedule schedule_;
  detail::CoefficientTable table_;
};

// ---------------------------------------------------------------------------
// Convenience entry points.

/// Advances `frame` from t0 to t1 (either direction) under the lambda-shifted
/// system.  Deterministic for fixed settings; throws NumericalFailure when
/// the symplectic drift exceeds settings.drift_tol.
inline LagrangianFrame integrate_frame(const CurvatureProfile& p, double lambda,
                                       const LagrangianFrame& frame, double t0, double t1,
                                       const FlowSettings& s = {}) {
  FlowEngine engine(p, s);
  return engine.transport(frame, t0, t1, lambda);
}

/// Vertical subspace transported from a to t.
inline LagrangianFrame sigma_lambda(const CurvatureProfile& p, double lambda, double t,
                                    const FlowSettings& s = {}) {
  FlowEngine engine(p, s);
  return engine.sigma_at(lambda, t);
}

/// Full 2n x 2n solution of Y' = A(t, lambda) Y with Y(t0) = I.
struct FundamentalSolution {
  double t0 = 0.0;
  RealMatrix phi;
};

/// max |Phi^T J Phi - J|: zero exactly for a symplectic matrix.
inline double symplectic_residual(const FundamentalSolution& f) {
  const RealMatrix& phi = f.phi;
  if (!phi.square() || phi.rows % 2 != 0)
    throw InvalidInput("symplectic_residual: matrix must be 2n x 2n");
  const std::size_t n = phi.rows / 2;
  double worst = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i)
    for (std::size_t j = 0; j < 2 * n; ++j) {
      // (Phi^T J Phi)_{ij} with J(q, p) = (-p, q)
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += phi(n + k, i) * phi(k, j) - phi(k, i) * phi(n + k, j);
      double expect = 0.0;
      if (j == i + n) expect = -1.0;
      if (i == j + n) expect = 1.0;
      worst = std::max(worst, std::abs(acc - expect));
    }
  return worst;
}

/// Integrates the fundamental solution t0 -> t1 without renormalization
/// (the matrix itself, not just its column span, is the result).  Throws
/// NumericalFailure when the final symplectic residual exceeds drift_tol.
inline FundamentalSolution integrate_fundamental(const CurvatureProfile& p, double lambda,
                                                 double t0, double t1,
                                                 const FlowSettings& s = {}) {
  validate_profile(p);
  validate_settings(s);
  detail::check_in_domain(p, t0);
  detail::check_in_domain(p, t1);
  const std::size_t n = p.n;
  const detail::StepSchedule sched = detail::make_schedule(p, s);
  const detail::CoefficientTable table = detail::CoefficientTable::build(p, sched);
  detail::FlowWorkspace ws(n, 2 * n);

  std::vector<double> m(2 * n * 2 * n, 0.0);
  for (std::size_t i = 0; i < 2 * n; ++i) m[i * 2 * n + i] = 1.0;

  auto direct_step = [&](double u0, double u1) {
    if (u0 == u1) return;
    const double mid = 0.5 * (u0 + u1);
    RealMatrix r0, rm, r1;
    if (p.kind == ProfileKind::PiecewiseConstant) {
      r0 = rm = r1 = curvature_at(p, mid);
    } else {
      r0 = curvature_at(p, u0);
      rm = curvature_at(p, mid);
      r1 = curvature_at(p, u1);
    }
    detail::rk4_step(m, u1 - u0, r0.data.data(), rm.data.data(), r1.data.data(), lambda, n,
                     2 * n, ws);
  };

  if (t1 >= t0) {
    std::size_t k0 = sched.node_at_or_before(t0);
    if (sched.nodes[k0] < t0) ++k0;
    if (k0 > sched.steps() || sched.nodes[k0] > t1) {
      direct_step(t0, t1);
    } else {
      direct_step(t0, sched.nodes[k0]);
      const std::size_t k1 = sched.node_at_or_before(t1);
      for (std::size_t k = k0; k < k1; ++k)
        detail::rk4_step(m, sched.nodes[k + 1] - sched.nodes[k], table.at(k, 0), table.at(k, 1),
                         table.at(k, 2), lambda, n, 2 * n, ws);
      direct_step(sched.nodes[k1], t1);
    }
  } else {
    std::size_t k0 = sched.node_at_or_before(t0);
    if (sched.nodes[k0] < t1) {
      direct_step(t0, t1);
    } else {
      direct_step(t0, sched.nodes[k0]);
      std::size_t k1 = sched.node_at_or_before(t1);
      if (sched.nodes[k1] < t1) ++k1;
      for (std::size_t k = k0; k-- > k1;)
        detail::rk4_step(m, sched.nodes[k] - sched.nodes[k + 1], table.at(k, 2), table.at(k, 1),
                         table.at(k, 0), lambda, n, 2 * n, ws);
      direct_step(sched.nodes[k1], t1);
    }
  }

  FundamentalSolution out;
  out.t0 = t0;
  out.phi = RealMatrix(2 * n, 2 * n);
  out.phi.data = std::move(m);
  const double res = symplectic_residual(out);
  if (res > s.drift_tol)
    throw NumericalFailure("fundamental solution symplectic residual " + std::to_string(res) +
                           " exceeds tolerance");
  return out;
}

}  // namespace maslov
