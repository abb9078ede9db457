#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "riskshare/error.hpp"

namespace riskshare {

using Vec = std::vector<double>;

/// Dense row-major matrix. Problem sizes here are desk scale.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vec>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) fail(ErrorKind::Structural, "ragged matrix rows");
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
    }
    return m;
  }
  /// Matrix whose columns are the given vectors.
  static Matrix from_columns(const std::vector<Vec>& cols, std::size_t height) {
    Matrix m(height, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].size() != height) fail(ErrorKind::Structural, "column length mismatch");
      for (std::size_t i = 0; i < height; ++i) m(i, j) = cols[j][i];
    }
    return m;
  }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vec column(std::size_t j) const {
    Vec c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  Vec operator*(std::span<const double> x) const {
    if (x.size() != cols_) fail(ErrorKind::Structural, "matrix-vector dimension mismatch");
    Vec y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) y[i] += (*this)(i, j) * x[j];
    return y;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }
inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

namespace detail {

/// Reduced row echelon form in place with partial pivoting. A pivot is
/// accepted when it exceeds rel_tol times the largest row norm of the input.
/// Returns the pivot columns.
inline std::vector<std::size_t> rref(Matrix& a, double rel_tol) {
  double scale = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) scale = std::max(scale, norm2(a.row(i)));
  const double tol = rel_tol * std::max(scale, 1e-300);
  std::vector<std::size_t> pivots;
  std::size_t r = 0;
  for (std::size_t c = 0; c < a.cols() && r < a.rows(); ++c) {
    std::size_t best = r;
    for (std::size_t i = r + 1; i < a.rows(); ++i)
      if (std::abs(a(i, c)) > std::abs(a(best, c))) best = i;
    if (std::abs(a(best, c)) <= tol) {
      for (std::size_t i = r; i < a.rows(); ++i) a(i, c) = 0.0;
      continue;
    }
    if (best != r)
      for (std::size_t j = 0; j < a.cols(); ++j) std::swap(a(best, j), a(r, j));
    const double p = a(r, c);
    for (std::size_t j = 0; j < a.cols(); ++j) a(r, j) /= p;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (i == r) continue;
      const double f = a(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) -= f * a(r, j);
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

}  // namespace detail

constexpr double kRankTol = 1e-10;

/// Modified Gram-Schmidt (two passes). Vectors that are dependent on the
/// ones before them, relative to their own norm, are dropped.
inline std::vector<Vec> orthonormalize(const std::vector<Vec>& vs, const std::vector<Vec>& against = {},
                                       double rel_tol = kRankTol) {
  std::vector<Vec> basis = against;
  const std::size_t start = basis.size();
  for (const Vec& v : vs) {
    Vec w = v;
    const double n0 = norm2(w);
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : basis) {
        const double c = dot(b, w);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * b[i];
      }
    const double n = norm2(w);
    if (n <= rel_tol * n0 * 1e2 || n <= 1e-14) continue;
    for (double& x : w) x /= n;
    basis.push_back(std::move(w));
  }
  return {basis.begin() + static_cast<std::ptrdiff_t>(start), basis.end()};
}

inline std::size_t rank(const Matrix& a, double rel_tol = kRankTol) {
  Matrix m = a;
  return detail::rref(m, rel_tol).size();
}

/// Orthonormal basis of {v : A v = 0}. Obtained from the reduced row echelon
/// form (one vector per free column), then orthonormalised.
inline std::vector<Vec> null_space(const Matrix& a, double rel_tol = kRankTol) {
  Matrix m = a;
  auto pivots = detail::rref(m, rel_tol);
  std::vector<bool> is_pivot(a.cols(), false);
  for (auto p : pivots) is_pivot[p] = true;
  std::vector<Vec> raw;
  for (std::size_t f = 0; f < a.cols(); ++f) {
    if (is_pivot[f]) continue;
    Vec v(a.cols(), 0.0);
    v[f] = 1.0;
    for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -m(r, f);
    raw.push_back(std::move(v));
  }
  return orthonormalize(raw);
}

/// Least-squares coefficients c minimising |sum_k c_k cols[k] - target|,
/// via the normal equations solved with Gaussian elimination. Columns are
/// assumed linearly independent.
inline Vec least_squares(const std::vector<Vec>& cols, std::span<const double> target) {
  const std::size_t k = cols.size();
  Matrix g(k, k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) g(i, j) = dot(cols[i], cols[j]);
    g(i, k) = dot(cols[i], target);
  }
  auto piv = detail::rref(g, 1e-14);
  if (piv.size() < k || (!piv.empty() && piv.back() == k))
    fail(ErrorKind::Numerical, "least_squares: dependent columns");
  Vec c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = g(i, k);
  return c;
}

/// Solve a square system A x = b by Gaussian elimination with partial pivoting.
/// Returns false when A is singular to working precision.
inline bool solve_square(Matrix a, Vec b, Vec& x) {
  const std::size_t n = a.rows();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t best = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(a(i, c)) > std::abs(a(best, c))) best = i;
    if (std::abs(a(best, c)) < 1e-300) return false;
    if (best != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(best, j), a(c, j));
      std::swap(b[best], b[c]);
    }
    for (std::size_t i = c + 1; i < n; ++i) {
      const double f = a(i, c) / a(c, c);
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a(i, j) -= f * a(c, j);
      b[i] -= f * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return true;
}

}  // namespace riskshare
