#pragma once

// Self-contained dense linear algebra for small matrices (n <= ~32):
// symmetric eigendecomposition by cyclic two-sided Jacobi rotations,
// rank/kernel extraction through singular values, LU solves with partial
// pivoting, and complex determinants.  Everything downstream (charts, flows,
// crossing detection) builds on these four primitives.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "maslov/errors.hpp"

namespace maslov {

/// Dense row-major real matrix.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static RealMatrix identity(std::size_t n) {
    RealMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool square() const { return rows == cols; }
};

/// Dense row-major complex square matrix.
struct ComplexMatrix {
  std::size_t n = 0;
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t dim) : n(dim), data(dim * dim, 0.0) {}

  std::complex<double>& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  std::complex<double> operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

// ---------------------------------------------------------------------------
// Elementwise helpers.

inline RealMatrix diag_matrix(const std::vector<double>& d) {
  RealMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

inline RealMatrix transpose(const RealMatrix& a) {
  RealMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline RealMatrix operator*(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols != b.rows) throw InvalidInput("matrix product: inner dimensions differ");
  RealMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline RealMatrix operator+(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw InvalidInput("matrix sum: shapes differ");
  RealMatrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline RealMatrix operator-(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw InvalidInput("matrix difference: shapes differ");
  RealMatrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline RealMatrix operator*(double s, const RealMatrix& a) {
  RealMatrix c = a;
  for (double& x : c.data) x *= s;
  return c;
}

inline double max_abs(const RealMatrix& a) {
  double m = 0.0;
  for (double x : a.data) m = std::max(m, std::abs(x));
  return m;
}

inline double frobenius_norm(const RealMatrix& a) {
  double s = 0.0;
  for (double x : a.data) s += x * x;
  return std::sqrt(s);
}

inline RealMatrix symmetrized(const RealMatrix& a) {
  if (!a.square()) throw InvalidInput("symmetrized: matrix not square");
  RealMatrix s(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

inline double asymmetry(const RealMatrix& a) {
  if (!a.square()) throw InvalidInput("asymmetry: matrix not square");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      m = std::max(m, std::abs(a(i, j) - a(j, i)));
  return m;
}

/// Extracts the submatrix with the given row and column index sets.
inline RealMatrix submatrix(const RealMatrix& a, const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& cols) {
  RealMatrix s(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) s(i, j) = a(rows[i], cols[j]);
  return s;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition.

/// Eigenvalues ascending; eigenvector k in column k of `eigenvectors`.
struct SymSpectrum {
  std::vector<double> eigenvalues;
  RealMatrix eigenvectors;
};

/// Cyclic two-sided Jacobi rotations, iterated until the off-diagonal norm
/// falls below 1e-14 * ||A||_F.  Input must be square and symmetric within
/// 1e-12 relative.
inline SymSpectrum sym_eig(const RealMatrix& input) {
  if (!input.square()) throw InvalidInput("sym_eig: matrix not square");
  const std::size_t n = input.rows;
  const double scale = max_abs(input);
  if (asymmetry(input) > 1e-12 * std::max(1.0, scale))
    throw InvalidInput("sym_eig: matrix not symmetric within 1e-12 relative");

  RealMatrix a = symmetrized(input);
  RealMatrix v = RealMatrix::identity(n);
  const double norm_a = frobenius_norm(a);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  if (norm_a > 0.0) {
    constexpr int kMaxSweeps = 64;
    int sweep = 0;
    while (off_norm() > 1e-14 * norm_a) {
      if (++sweep > kMaxSweeps)
        throw NumericalFailure("sym_eig: Jacobi sweeps failed to converge");
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (std::abs(apq) <= 1e-300) {
            a(p, q) = a(q, p) = 0.0;
            continue;
          }
          const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          const double app = a(p, p), aqq = a(q, q);
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = a(q, p) = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            if (k == p || k == q) continue;
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = a(p, k) = c * akp - s * akq;
            a(k, q) = a(q, k) = s * akp + c * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v(k, p), vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymSpectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors = RealMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank and kernel through singular values.

struct RankKernel {
  std::size_t rank = 0;
  RealMatrix kernel_basis;               // cols = nullity, orthonormal columns
  std::vector<double> singular_values;   // ascending
};

/// Singular values are taken as square roots of the (clamped) eigenvalues of
/// M^T M; entries below tol * s_max count as zero.  Adequate accuracy at the
/// sizes used here, and the kernel basis comes out orthonormal for free.
/// The Gram route floors reliable separation near sqrt(eps) * s_max, so the
/// default tolerance sits an order of magnitude above that.
inline RankKernel rank_kernel(const RealMatrix& m, double tol = 1e-6) {
  if (tol < 0.0) throw InvalidInput("rank_kernel: negative tolerance");
  const std::size_t c = m.cols;
  RankKernel out;
  if (c == 0) {
    out.kernel_basis = RealMatrix(0, 0);
    return out;
  }
  const SymSpectrum spec = sym_eig(symmetrized(transpose(m) * m));
  out.singular_values.resize(c);
  for (std::size_t i = 0; i < c; ++i)
    out.singular_values[i] = std::sqrt(std::max(0.0, spec.eigenvalues[i]));
  const double s_max = out.singular_values.back();
  std::size_t rank = 0;
  if (s_max > 0.0) {
    for (double s : out.singular_values)
      if (s > tol * s_max) ++rank;
  }
  out.rank = rank;
  const std::size_t nullity = c - rank;
  out.kernel_basis = RealMatrix(c, nullity);
  for (std::size_t j = 0; j < nullity; ++j)
    for (std::size_t i = 0; i < c; ++i)
      out.kernel_basis(i, j) = spec.eigenvectors(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Linear solves.

/// Solves A X = B by LU with partial pivoting.  Throws SingularMatrix when a
/// pivot falls below 100 * eps * n * max|A|.
inline RealMatrix solve_linear(const RealMatrix& a_in, const RealMatrix& b_in) {
  if (!a_in.square()) throw InvalidInput("solve_linear: matrix not square");
  if (a_in.rows != b_in.rows) throw InvalidInput("solve_linear: rhs rows mismatch");
  const std::size_t n = a_in.rows;
  RealMatrix a = a_in;
  RealMatrix x = b_in;
  const double piv_tol =
      100.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(n, 1)) * max_abs(a_in);

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) <= piv_tol)
      throw SingularMatrix("solve_linear: pivot below tolerance (matrix singular)");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      for (std::size_t j = 0; j < x.cols; ++j) std::swap(x(k, j), x(piv, j));
    }
    const double inv = 1.0 / a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) * inv;
      if (f == 0.0) continue;
      a(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < x.cols; ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      double s = x(kk, j);
      for (std::size_t i = kk + 1; i < n; ++i) s -= a(kk, i) * x(i, j);
      x(kk, j) = s / a(kk, kk);
    }
  }
  return x;
}

/// Sign of det(Q) for a square matrix, via the pivoted LU above; returns 0
/// when a pivot underflows the singularity tolerance.
inline int det_sign(const RealMatrix& a_in) {
  if (!a_in.square()) throw InvalidInput("det_sign: matrix not square");
  const std::size_t n = a_in.rows;
  RealMatrix a = a_in;
  const double piv_tol =
      100.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(n, 1)) * max_abs(a_in);
  int sign = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) <= piv_tol) return 0;
    if (piv != k) {
      sign = -sign;
      for (std::size_t j = k; j < n; ++j) std::swap(a(k, j), a(piv, j));
    }
    if (a(k, k) < 0.0) sign = -sign;
    const double inv = 1.0 / a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) * inv;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return sign;
}

// ---------------------------------------------------------------------------
// Complex determinant.

/// Determinant by LU with partial pivoting on |.|.
inline std::complex<double> complex_det(const ComplexMatrix& m_in) {
  const std::size_t n = m_in.n;
  ComplexMatrix m = m_in;
  std::complex<double> det(1.0, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
    if (std::abs(m(piv, k)) == 0.0) return {0.0, 0.0};
    if (piv != k) {
      det = -det;
      for (std::size_t j = k; j < n; ++j) std::swap(m(k, j), m(piv, j));
    }
    det *= m(k, k);
    const std::complex<double> inv = 1.0 / m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const std::complex<double> f = m(i, k) * inv;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
    }
  }
  return det;
}

}  // namespace maslov
