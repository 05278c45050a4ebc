#pragma once

// Dense real linear algebra for small symmetric positive-definite matrices.
// Everything goes through a lower-triangular Cholesky factor; no inverse is
// ever formed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ssdet/errors.hpp"

namespace ssdet {

using Vector = std::vector<double>;

// Row-major dense matrix. Deliberately minimal: the detectors only need
// element access, column views by copy and a handful of products.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionMismatch("ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector col(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  void set_col(std::size_t j, std::span<const double> values) {
    if (values.size() != rows_) throw DimensionMismatch("set_col: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix& operator*=(double c) {
    for (auto& x : data_) x *= c;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// X * X^T for an N x M matrix X.
inline Matrix gram(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = dot(x.row(i), x.row(j));
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

// a += c * u * u^T
inline void add_outer(Matrix& a, std::span<const double> u, double c = 1.0) {
  if (a.rows() != u.size() || a.cols() != u.size()) throw DimensionMismatch("add_outer");
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < u.size(); ++j) a(i, j) += c * u[i] * u[j];
}

inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matvec");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

// Immutable SPD matrix with its Cholesky factor A = L L^T computed at
// construction. Safe to share read-only across threads.
class SpdMatrix {
 public:
  // Pivots at or below this fraction of the largest diagonal entry are
  // rejected as not positive definite.
  static constexpr double kPivotTolerance = 1e-12;

  explicit SpdMatrix(const Matrix& entries) : a_(symmetrized(entries)), l_(a_.rows(), a_.rows()) {
    factorize();
  }

  std::size_t dim() const noexcept { return a_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return a_(i, j); }
  const Matrix& entries() const noexcept { return a_; }
  const Matrix& lower() const noexcept { return l_; }

  double logdet() const noexcept { return logdet_; }

  // Forward substitution: returns L^{-1} b.
  Vector whiten(std::span<const double> b) const {
    check_len(b.size());
    const std::size_t n = dim();
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      double s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
      y[i] = s / l_(i, i);
    }
    return y;
  }

  // A^{-1} b via two triangular solves.
  Vector solve(std::span<const double> b) const {
    Vector y = whiten(b);
    const std::size_t n = dim();
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * y[k];
      y[ii] = s / l_(ii, ii);
    }
    return y;
  }

  // x^T A^{-1} y. Computed as (L^{-1}x).(L^{-1}y), so it is exactly
  // symmetric in its arguments.
  double quad_form(std::span<const double> x, std::span<const double> y) const {
    const Vector wx = whiten(x);
    const Vector wy = whiten(y);
    return dot(wx, wy);
  }

 private:
  static Matrix symmetrized(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0)
      throw DimensionMismatch("SpdMatrix: entries must be a non-empty square array");
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (!std::isfinite(m(i, j))) throw InvalidModel("SpdMatrix: non-finite entry");
        s(i, j) = 0.5 * (m(i, j) + m(j, i));
      }
    }
    return s;
  }

  void check_len(std::size_t len) const {
    if (len != dim())
      throw DimensionMismatch("SpdMatrix: vector of length " + std::to_string(len) +
                              " against dimension " + std::to_string(dim()));
  }

  void factorize() {
    const std::size_t n = dim();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a_(i, i));
    const double tol = kPivotTolerance * max_diag;
    logdet_ = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = a_(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > tol) || max_diag <= 0.0)
        throw NotPositiveDefinite("SpdMatrix: pivot " + std::to_string(j) + " is " +
                                  std::to_string(d) + " (tolerance " + std::to_string(tol) + ")");
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      logdet_ += 2.0 * std::log(ljj);
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
  }

  Matrix a_;
  Matrix l_;
  double logdet_ = 0.0;
};

inline SpdMatrix spd_from_entries(const Matrix& entries) { return SpdMatrix(entries); }

inline double quad_form(const SpdMatrix& a, std::span<const double> x, std::span<const double> y) {
  return a.quad_form(x, y);
}

inline double logdet(const SpdMatrix& a) noexcept { return a.logdet(); }

// ln det(A + u u^T + w w^T) from the factorization of A alone.
inline double rank_two_update_logdet(const SpdMatrix& a, std::span<const double> u,
                                     std::span<const double> w) {
  const Vector wu = a.whiten(u);
  const Vector ww = a.whiten(w);
  const double uu = dot(wu, wu);
  const double vv = dot(ww, ww);
  const double uv = dot(wu, ww);
  return a.logdet() + std::log((1.0 + uu) * (1.0 + vv) - uv * uv);
}

}  // namespace ssdet
