#pragma once

// Symmetric block-tridiagonal spectral counting for the discretized
// Sturm-Liouville operator -u'' + R(t) u and for the piecewise-linear
// Galerkin matrix of the index form.  Negative-eigenvalue counts come from
// the inertia of a block LDL^t sweep (Sylvester's law per leading block),
// individual eigenvalues from bisection on the count function.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "maslov/errors.hpp"
#include "maslov/jacobi_flow.hpp"
#include "maslov/numkernel.hpp"

namespace maslov {

/// Symmetric block tridiagonal matrix: diag[i] on the diagonal (n x n,
/// symmetric), off[i] coupling block row i to i+1.  The full matrix is
/// (m n) x (m n) for m diagonal blocks.
struct BlockTridiag {
  std::size_t n = 0;
  std::vector<RealMatrix> diag;
  std::vector<RealMatrix> off;

  std::size_t blocks() const { return diag.size(); }
  std::size_t dim() const { return diag.size() * n; }
};

inline void validate_block_tridiag(const BlockTridiag& t) {
  if (t.n == 0 || t.diag.empty()) throw InvalidInput("block tridiag: empty");
  if (t.off.size() + 1 != t.diag.size())
    throw InvalidInput("block tridiag: need one off-diagonal block per adjacent pair");
  for (const auto& d : t.diag)
    if (d.rows != t.n || d.cols != t.n) throw InvalidInput("block tridiag: bad diag shape");
  for (const auto& o : t.off)
    if (o.rows != t.n || o.cols != t.n) throw InvalidInput("block tridiag: bad off shape");
}

namespace detail {

/// Apply D^{-1} with eigenvalues clamped away from zero, so the LDL^t sweep
/// survives a pivot block that is numerically singular.
inline RealMatrix clamped_inverse_apply(const SymSpectrum& spec, const RealMatrix& rhs,
                                        double clamp) {
  const std::size_t n = rhs.rows;
  RealMatrix vt_rhs = transpose(spec.eigenvectors) * rhs;
  for (std::size_t i = 0; i < n; ++i) {
    double e = spec.eigenvalues[i];
    if (std::abs(e) < clamp) e = (e < 0.0 ? -clamp : clamp);
    for (std::size_t j = 0; j < rhs.cols; ++j) vt_rhs(i, j) /= e;
  }
  return spec.eigenvectors * vt_rhs;
}

}  // namespace detail

/// Number of eigenvalues of T strictly below mu, by the inertia of the
/// shifted block LDL^t factorization.
inline std::size_t count_below(const BlockTridiag& t, double mu) {
  validate_block_tridiag(t);
  const std::size_t n = t.n;
  std::size_t count = 0;
  RealMatrix d = t.diag[0];
  for (std::size_t i = 0; i < n; ++i) d(i, i) -= mu;
  for (std::size_t k = 0;; ++k) {
    const SymSpectrum spec = sym_eig(symmetrized(d));
    for (double e : spec.eigenvalues)
      if (e < 0.0) ++count;
    if (k + 1 == t.blocks()) break;
    const double clamp = 1e-13 * std::max(1.0, max_abs(d));
    const RealMatrix dinv_b = detail::clamped_inverse_apply(spec, t.off[k], clamp);
    d = t.diag[k + 1] - transpose(t.off[k]) * dinv_b;
    for (std::size_t i = 0; i < n; ++i) d(i, i) -= mu;
  }
  return count;
}

/// Gershgorin interval containing the whole spectrum.
inline std::pair<double, double> gershgorin_bounds(const BlockTridiag& t) {
  validate_block_tridiag(t);
  const std::size_t n = t.n;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t k = 0; k < t.blocks(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double radius = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) radius += std::abs(t.diag[k](i, j));
        if (k > 0) radius += std::abs(t.off[k - 1](j, i));
        if (k + 1 < t.blocks()) radius += std::abs(t.off[k](i, j));
      }
      const double center = t.diag[k](i, i);
      lo = first ? center - radius : std::min(lo, center - radius);
      hi = first ? center + radius : std::max(hi, center + radius);
      first = false;
    }
  }
  return {lo, hi};
}

/// The k smallest eigenvalues (ascending) by bisection on count_below.
inline std::vector<double> smallest_eigenvalues(const BlockTridiag& t, std::size_t k,
                                                double tol = 1e-10) {
  validate_block_tridiag(t);
  k = std::min(k, t.dim());
  auto [lo_all, hi_all] = gershgorin_bounds(t);
  const double span = std::max(1.0, hi_all - lo_all);
  std::vector<double> out;
  for (std::size_t j = 1; j <= k; ++j) {
    double lo = lo_all, hi = hi_all;
    while (hi - lo > tol * span) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(t, mid) >= j)
        hi = mid;
      else
        lo = mid;
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discretizations of the index problem.

/// Three-point finite differences for -u'' + R(t) u with Dirichlet ends:
/// interior nodes t_i = a + i h, i = 1..m-1, h = (b-a)/m.
inline BlockTridiag sl_fd_matrix(const CurvatureProfile& p, std::size_t mesh) {
  if (mesh < 4) throw InvalidInput("sl_fd_matrix: mesh must be at least 4");
  const std::size_t n = p.n;
  const double h = (p.b - p.a) / static_cast<double>(mesh);
  BlockTridiag t;
  t.n = n;
  const double inv_h2 = 1.0 / (h * h);
  RealMatrix off(n, n);
  for (std::size_t i = 0; i < n; ++i) off(i, i) = -inv_h2;
  for (std::size_t i = 1; i < mesh; ++i) {
    RealMatrix d = curvature_at(p, p.a + h * static_cast<double>(i));
    for (std::size_t r = 0; r < n; ++r) d(r, r) += 2.0 * inv_h2;
    t.diag.push_back(std::move(d));
    if (i + 1 < mesh) t.off.push_back(off);
  }
  return t;
}

/// Piecewise-linear Galerkin matrix of the index form
/// H(u, u) = int |u'|^2 + u^t R u dt over hat functions with Dirichlet
/// ends.  R is frozen at each element midpoint, so the element mass block
/// is h [[1/3, 1/6], [1/6, 1/3]] (x) R(mid).
inline BlockTridiag hessian_fd_matrix(const CurvatureProfile& p, std::size_t mesh) {
  if (mesh < 4) throw InvalidInput("hessian_fd_matrix: mesh must be at least 4");
  const std::size_t n = p.n;
  const double h = (p.b - p.a) / static_cast<double>(mesh);
  std::vector<RealMatrix> r_mid;
  r_mid.reserve(mesh);
  for (std::size_t k = 0; k < mesh; ++k)
    r_mid.push_back(curvature_at(p, p.a + h * (static_cast<double>(k) + 0.5)));

  BlockTridiag t;
  t.n = n;
  for (std::size_t i = 1; i < mesh; ++i) {
    RealMatrix d = (h / 3.0) * (r_mid[i - 1] + r_mid[i]);
    for (std::size_t r = 0; r < n; ++r) d(r, r) += 2.0 / h;
    t.diag.push_back(std::move(d));
    if (i + 1 < mesh) {
      RealMatrix o = (h / 6.0) * r_mid[i];
      for (std::size_t r = 0; r < n; ++r) o(r, r) -= 1.0 / h;
      t.off.push_back(std::move(o));
    }
  }
  return t;
}

}  // namespace maslov
