#pragma once

// Lagrangian subspaces of R^{2n} and coordinate charts on the Lagrangian
// Grassmannian.
//
// Conventions.  A frame stacks the q-block on top of the p-block: column
// vectors are (q, p) with q, p in R^n.  The complex structure J maps
// (q, p) -> (-p, q), the symplectic form is w(u, v) = u^T J v, and the
// identification with C^n reads a column as q + i p.  The vertical subspace
// sigma = {0} x R^n plays the role of the reference Lagrangian: nullities
// and train crossings are always measured against it.
//
// The chart with index set K sends a symmetric matrix S to J_K applied to
// the graph {(q, S q)}, where J_K multiplies by i only in the coordinate
// planes listed in K.  A subspace in this chart meets sigma exactly in as
// many dimensions as the kernel of the K x K block of S.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "maslov/errors.hpp"
#include "maslov/numkernel.hpp"

namespace maslov {

/// Frame of a Lagrangian subspace: 2n x n, columns spanning the subspace.
struct LagrangianFrame {
  std::size_t n = 0;
  RealMatrix m;  // 2n x n

  LagrangianFrame() = default;
  LagrangianFrame(std::size_t dim, RealMatrix frame) : n(dim), m(std::move(frame)) {
    if (m.rows != 2 * n || m.cols != n)
      throw InvalidInput("LagrangianFrame: frame must be 2n x n");
  }

  RealMatrix q_block() const {
    RealMatrix q(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) q(i, j) = m(i, j);
    return q;
  }
  RealMatrix p_block() const {
    RealMatrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) p(i, j) = m(n + i, j);
    return p;
  }
};

/// Chart coordinates: the index set K (0-based, strictly increasing) and the
/// symmetric matrix S.  `asymmetry_seen` records how far the raw solve was
/// from symmetric before symmetrization (diagnostic).
struct ChartCoords {
  std::vector<std::size_t> K;
  RealMatrix S;
  double asymmetry_seen = 0.0;
};

/// Value of the squared-determinant map; unit modulus up to roundoff.
struct UnitComplex {
  std::complex<double> value{1.0, 0.0};
  double phase() const { return std::arg(value); }
};

// ---------------------------------------------------------------------------
// Basic constructions.

/// J M, with J(q, p) = (-p, q).
inline RealMatrix apply_complex_structure(const RealMatrix& m) {
  if (m.rows % 2 != 0) throw InvalidInput("apply_complex_structure: odd row count");
  const std::size_t n = m.rows / 2;
  RealMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      out(i, j) = -m(n + i, j);
      out(n + i, j) = m(i, j);
    }
  return out;
}

/// The vertical reference Lagrangian sigma = {0} x R^n.
inline LagrangianFrame canonical_sigma(std::size_t n) {
  RealMatrix m(2 * n, n);
  for (std::size_t i = 0; i < n; ++i) m(n + i, i) = 1.0;
  return LagrangianFrame(n, std::move(m));
}

/// The horizontal Lagrangian R^n x {0}.
inline LagrangianFrame canonical_horizontal(std::size_t n) {
  RealMatrix m(2 * n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return LagrangianFrame(n, std::move(m));
}

/// M^T J M; vanishes exactly when the column span is isotropic.
inline RealMatrix isotropy_form(const RealMatrix& m) {
  return transpose(m) * apply_complex_structure(m);
}

inline double isotropy_residual(const LagrangianFrame& f) {
  return max_abs(isotropy_form(f.m));
}

/// Full rank plus isotropy within tol * max(1, ||M||^2).
inline bool is_lagrangian(const LagrangianFrame& f, double tol = 1e-10) {
  const double norm2 = frobenius_norm(f.m);
  if (max_abs(isotropy_form(f.m)) > tol * std::max(1.0, norm2 * norm2)) return false;
  return rank_kernel(f.m).rank == f.n;
}

/// Modified Gram-Schmidt with one re-orthogonalization pass; preserves the
/// column span.  Throws NumericalFailure on (numerically) dependent columns.
inline LagrangianFrame orthonormalized(const LagrangianFrame& f) {
  const std::size_t rows = f.m.rows, cols = f.m.cols;
  RealMatrix u = f.m;
  auto col_dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += u(i, a) * u(i, b);
    return s;
  };
  for (std::size_t j = 0; j < cols; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double proj = col_dot(k, j);
        for (std::size_t i = 0; i < rows; ++i) u(i, j) -= proj * u(i, k);
      }
    }
    const double norm = std::sqrt(col_dot(j, j));
    if (norm < 1e-13)
      throw NumericalFailure("orthonormalized: frame columns numerically dependent");
    for (std::size_t i = 0; i < rows; ++i) u(i, j) /= norm;
  }
  return LagrangianFrame(f.n, std::move(u));
}

/// Ascending singular values of the q-block of the orthonormalized frame.
/// The smallest one measures the distance to the train of sigma.
inline std::vector<double> vertical_gap_singular_values(const LagrangianFrame& f) {
  const LagrangianFrame o = orthonormalized(f);
  return rank_kernel(o.q_block()).singular_values;
}

/// dim(span(M) /\ sigma) = n - rank(q-block).  The orthonormalized frame has
/// unit scale, so its q-block singular values are sines of principal angles
/// to the vertical; they are compared against rank_tol absolutely (a
/// relative rank would never flag a frame sitting exactly on the train).
inline std::size_t intersection_dim(const LagrangianFrame& f, double rank_tol = 1e-8) {
  std::size_t dim = 0;
  for (double s : vertical_gap_singular_values(f))
    if (s <= rank_tol) ++dim;
  return dim;
}

// ---------------------------------------------------------------------------
// Charts.

namespace detail {

/// Applies J_K^{-1}: (q_i, p_i) -> (p_i, -q_i) on the planes in K.
inline RealMatrix apply_jk_inverse(const RealMatrix& m, std::size_t n,
                                   const std::vector<std::size_t>& K) {
  RealMatrix out = m;
  for (std::size_t i : K) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double q = m(i, j), p = m(n + i, j);
      out(i, j) = p;
      out(n + i, j) = -q;
    }
  }
  return out;
}

inline void validate_chart_indices(std::size_t n, const std::vector<std::size_t>& K) {
  for (std::size_t idx = 0; idx < K.size(); ++idx) {
    if (K[idx] >= n) throw InvalidInput("chart index out of range");
    if (idx > 0 && K[idx] <= K[idx - 1])
      throw InvalidInput("chart indices must be strictly increasing");
  }
}

}  // namespace detail

/// Transversality of span(M) to the coordinate Lagrangian sigma_K is
/// equivalent to invertibility of the matrix whose rows are: q-rows outside
/// K and p-rows inside K.  This is exactly the top block seen by to_chart.
inline bool transversal_to_plane(const LagrangianFrame& f, const std::vector<std::size_t>& K,
                                 double rank_tol = 1e-8) {
  detail::validate_chart_indices(f.n, K);
  const LagrangianFrame o = orthonormalized(f);
  const RealMatrix rotated = detail::apply_jk_inverse(o.m, f.n, K);
  RealMatrix top(f.n, f.n);
  for (std::size_t i = 0; i < f.n; ++i)
    for (std::size_t j = 0; j < f.n; ++j) top(i, j) = rotated(i, j);
  // The rotated frame is still orthonormal, so these singular values live in
  // [0, 1]; compare absolutely (see intersection_dim).
  for (double s : rank_kernel(top).singular_values)
    if (s <= rank_tol) return false;
  return true;
}

/// Chart representation: S = p-block * (q-block)^{-1} after undoing J_K.
/// Throws ChartDomain when the subspace is not transversal to sigma_K.
inline ChartCoords to_chart(const LagrangianFrame& f, const std::vector<std::size_t>& K) {
  detail::validate_chart_indices(f.n, K);
  const std::size_t n = f.n;
  const LagrangianFrame o = orthonormalized(f);
  const RealMatrix rotated = detail::apply_jk_inverse(o.m, n, K);
  RealMatrix top(n, n), bottom(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      top(i, j) = rotated(i, j);
      bottom(i, j) = rotated(n + i, j);
    }
  RealMatrix st;
  try {
    st = solve_linear(transpose(top), transpose(bottom));  // solves S top = bottom
  } catch (const SingularMatrix&) {
    throw ChartDomain("to_chart: subspace not transversal to the requested plane");
  }
  const RealMatrix s_raw = transpose(st);
  ChartCoords out;
  out.K = K;
  out.asymmetry_seen = asymmetry(s_raw);
  out.S = symmetrized(s_raw);
  return out;
}

/// Inverse chart map: the frame J_K [I; S].
inline LagrangianFrame from_chart(const std::vector<std::size_t>& K, const RealMatrix& S) {
  if (!S.square()) throw InvalidInput("from_chart: S not square");
  const std::size_t n = S.rows;
  detail::validate_chart_indices(n, K);
  if (asymmetry(S) > 1e-10 * std::max(1.0, max_abs(S)))
    throw InvalidInput("from_chart: S not symmetric");
  RealMatrix m(2 * n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      m(i, j) = (i == j) ? 1.0 : 0.0;
      m(n + i, j) = S(i, j);
    }
  // Apply J_K: (q_i, p_i) -> (-p_i, q_i) for i in K.
  for (std::size_t i : K) {
    for (std::size_t j = 0; j < n; ++j) {
      const double q = m(i, j), p = m(n + i, j);
      m(i, j) = -p;
      m(n + i, j) = q;
    }
  }
  return LagrangianFrame(n, std::move(m));
}

inline LagrangianFrame from_chart(const ChartCoords& c) { return from_chart(c.K, c.S); }

/// Chart selection for a subspace whose q-block has `cluster_dim` (near-)
/// kernel directions: the p-parts of those directions span the intersection
/// with sigma (orthogonal complement of the q-column span), and K collects
/// the `cluster_dim` best-pivot rows of that span.  With the exact kernel
/// dimension this is the canonical-completion construction; transversality
/// to sigma_K is verified before returning.
inline std::vector<std::size_t> chart_for_cluster(const LagrangianFrame& f,
                                                  std::size_t cluster_dim) {
  const std::size_t n = f.n;
  if (cluster_dim > n) throw InvalidInput("chart_for_cluster: cluster too large");
  if (cluster_dim == 0) return {};
  const LagrangianFrame o = orthonormalized(f);
  const RealMatrix q = o.q_block();
  const RealMatrix p = o.p_block();
  const SymSpectrum spec = sym_eig(symmetrized(transpose(q) * q));
  RealMatrix c(n, cluster_dim);  // near-kernel directions of the q-block
  for (std::size_t j = 0; j < cluster_dim; ++j)
    for (std::size_t i = 0; i < n; ++i) c(i, j) = spec.eigenvectors(i, j);
  RealMatrix b = p * c;  // p-parts: n x cluster_dim, full column rank

  // Greedy column-pivoted orthogonalization over the rows of b (ties go to
  // the lowest index): selected rows give a well-conditioned K x K block.
  RealMatrix w = transpose(b);  // cluster_dim x n, columns indexed by row of b
  std::vector<std::size_t> chosen;
  std::vector<bool> used(n, false);
  for (std::size_t step = 0; step < cluster_dim; ++step) {
    std::size_t best = n;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < cluster_dim; ++i) s += w(i, j) * w(i, j);
      if (s > best_norm) {  // strict: ties resolve to the lowest index
        best_norm = s;
        best = j;
      }
    }
    if (best == n || best_norm <= 0.0)
      throw NumericalFailure("chart_for_cluster: pivot selection collapsed");
    used[best] = true;
    chosen.push_back(best);
    const double inv = 1.0 / std::sqrt(best_norm);
    std::vector<double> dir(cluster_dim);
    for (std::size_t i = 0; i < cluster_dim; ++i) dir[i] = w(i, best) * inv;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      double proj = 0.0;
      for (std::size_t i = 0; i < cluster_dim; ++i) proj += dir[i] * w(i, j);
      for (std::size_t i = 0; i < cluster_dim; ++i) w(i, j) -= proj * dir[i];
    }
  }
  std::sort(chosen.begin(), chosen.end());
  if (!transversal_to_plane(f, chosen))
    throw NumericalFailure("chart_for_cluster: selected plane not transversal");
  return chosen;
}

/// Chart whose domain contains the given subspace, |K| = dim(span /\ sigma).
inline std::vector<std::size_t> select_chart(const LagrangianFrame& f, double rank_tol = 1e-8) {
  return chart_for_cluster(f, intersection_dim(f, rank_tol));
}

// ---------------------------------------------------------------------------
// Squared determinant and rotations.

/// det(U)^2 for a unitary representative U = Q + iP built from any
/// orthonormal frame; independent of the chosen frame.  For a graph of S it
/// equals det((I + iS)(I - iS)^{-1}).
inline UnitComplex det2(const LagrangianFrame& f) {
  const LagrangianFrame o = orthonormalized(f);
  const std::size_t n = f.n;
  ComplexMatrix u(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      u(i, j) = std::complex<double>(o.m(i, j), o.m(n + i, j));
  const std::complex<double> d = complex_det(u);
  return UnitComplex{d * d};
}

/// Rotation by angle t in the coordinate planes listed in K (multiplication
/// by e^{it} on those complex coordinates).  K = {0..n-1} rotates the whole
/// space.
inline LagrangianFrame rotate(const LagrangianFrame& f, const std::vector<std::size_t>& K,
                              double t) {
  detail::validate_chart_indices(f.n, K);
  const double c = std::cos(t), s = std::sin(t);
  RealMatrix m = f.m;
  for (std::size_t i : K) {
    for (std::size_t j = 0; j < f.n; ++j) {
      const double q = f.m(i, j), p = f.m(f.n + i, j);
      m(i, j) = c * q - s * p;
      m(f.n + i, j) = s * q + c * p;
    }
  }
  return LagrangianFrame(f.n, std::move(m));
}

inline std::vector<std::size_t> full_index_set(std::size_t n) {
  std::vector<std::size_t> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = i;
  return k;
}

/// Closed form for the full rotation flow in a graph chart:
///   S(t) = (sin t I + cos t S0)(cos t I - sin t S0)^{-1},
/// with derivative I + S0^2 at t = 0.  Throws ChartDomain when the
/// denominator is singular (the rotated subspace left the chart).
inline RealMatrix chart_flow_formula(const RealMatrix& s0, double t) {
  if (!s0.square()) throw InvalidInput("chart_flow_formula: S0 not square");
  if (asymmetry(s0) > 1e-10 * std::max(1.0, max_abs(s0)))
    throw InvalidInput("chart_flow_formula: S0 not symmetric");
  const std::size_t n = s0.rows;
  const double c = std::cos(t), s = std::sin(t);
  RealMatrix num(n, n), den(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num(i, j) = c * s0(i, j) + (i == j ? s : 0.0);
      den(i, j) = -s * s0(i, j) + (i == j ? c : 0.0);
    }
  // Leaving the chart means the denominator degenerates relative to the
  // frame scale max(||num||, ||den||) >= 1, not relative to its own largest
  // entry -- a tiny but nonzero 1 x 1 denominator must still throw.
  const double scale = std::max({1.0, max_abs(num), max_abs(den)});
  if (rank_kernel(den).singular_values.front() < 1e-12 * scale)
    throw ChartDomain("chart_flow_formula: rotation left the chart domain");
  RealMatrix out;
  try {
    // num and den are polynomials in S0, hence commute; den^{-1} num is the
    // same as num den^{-1} and symmetric.
    out = solve_linear(den, num);
  } catch (const SingularMatrix&) {
    throw ChartDomain("chart_flow_formula: rotation left the chart domain");
  }
  return symmetrized(out);
}

// ---------------------------------------------------------------------------
// Subspace comparison.

/// Projection residual ||Ub - Ua (Ua^T Ub)||_F, which equals
/// sqrt(n - ||Ua^T Ub||_F^2) in exact arithmetic but avoids the
/// cancellation that caps that formula at sqrt(eps) resolution.  Zero
/// exactly for equal subspaces, sqrt(n) for orthogonal ones.
inline double subspace_gap(const LagrangianFrame& a, const LagrangianFrame& b) {
  if (a.n != b.n) throw InvalidInput("subspace_gap: dimensions differ");
  const LagrangianFrame ua = orthonormalized(a);
  const LagrangianFrame ub = orthonormalized(b);
  const RealMatrix g = transpose(ua.m) * ub.m;
  const RealMatrix resid = ub.m - ua.m * g;
  return frobenius_norm(resid);
}

/// Equality of spans, tested by the rank of the concatenated 2n x 2n matrix.
/// The tolerance tracks rank_kernel's Gram-route floor.
inline bool same_lagrangian(const LagrangianFrame& a, const LagrangianFrame& b,
                            double rank_tol = 1e-6) {
  if (a.n != b.n) return false;
  const LagrangianFrame ua = orthonormalized(a);
  const LagrangianFrame ub = orthonormalized(b);
  RealMatrix cat(2 * a.n, 2 * a.n);
  for (std::size_t i = 0; i < 2 * a.n; ++i)
    for (std::size_t j = 0; j < a.n; ++j) {
      cat(i, j) = ua.m(i, j);
      cat(i, a.n + j) = ub.m(i, j);
    }
  return rank_kernel(cat, rank_tol).rank == a.n;
}

}  // namespace maslov
