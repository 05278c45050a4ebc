#pragma once

// Complex Hermitian positive-definite path used by the conventional
// (complex-domain) detectors. Kept separate from realspd on purpose so the
// two families share no numerical code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ssdet/errors.hpp"

namespace ssdet {

using cdouble = std::complex<double>;
using CVector = std::vector<cdouble>;

class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  cdouble& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cdouble& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  CVector col(std::size_t j) const {
    CVector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  void set_col(std::size_t j, std::span<const cdouble> values) {
    if (values.size() != rows_) throw DimensionMismatch("CMatrix::set_col");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cdouble> data_;
};

// a^H b
inline cdouble cdot(std::span<const cdouble> a, std::span<const cdouble> b) {
  if (a.size() != b.size()) throw DimensionMismatch("cdot");
  cdouble s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Sum_k x_k x_k^H over the columns of X.
inline CMatrix scatter(const CMatrix& x) {
  const std::size_t n = x.rows();
  CMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * std::conj(x(j, k));
      s(i, j) = acc;
      s(j, i) = std::conj(acc);
    }
  }
  return s;
}

// Hermitian PD matrix with its complex Cholesky factor (A = L L^H).
class HermitianPd {
 public:
  static constexpr double kPivotTolerance = 1e-12;

  explicit HermitianPd(const CMatrix& entries) : a_(entries), l_(entries.rows(), entries.rows()) {
    if (a_.rows() != a_.cols() || a_.rows() == 0) throw DimensionMismatch("HermitianPd: not square");
    const std::size_t n = a_.rows();
    for (std::size_t i = 0; i < n; ++i) {
      a_(i, i) = cdouble(a_(i, i).real(), 0.0);
      for (std::size_t j = 0; j < i; ++j) {
        const cdouble avg = 0.5 * (a_(i, j) + std::conj(a_(j, i)));
        a_(i, j) = avg;
        a_(j, i) = std::conj(avg);
      }
    }
    factorize();
  }

  std::size_t dim() const noexcept { return a_.rows(); }
  const CMatrix& entries() const noexcept { return a_; }
  const CMatrix& lower() const noexcept { return l_; }
  double logdet() const noexcept { return logdet_; }

  CVector whiten(std::span<const cdouble> b) const {
    if (b.size() != dim()) throw DimensionMismatch("HermitianPd::whiten");
    const std::size_t n = dim();
    CVector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      cdouble s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
      y[i] = s / l_(i, i).real();
    }
    return y;
  }

  // x^H A^{-1} y
  cdouble quad_form(std::span<const cdouble> x, std::span<const cdouble> y) const {
    const CVector wx = whiten(x);
    const CVector wy = whiten(y);
    return cdot(wx, wy);
  }

 private:
  void factorize() {
    const std::size_t n = dim();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a_(i, i).real());
    const double tol = kPivotTolerance * max_diag;
    logdet_ = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = a_(j, j).real();
      for (std::size_t k = 0; k < j; ++k) d -= std::norm(l_(j, k));
      if (!(d > tol) || max_diag <= 0.0)
        throw NotPositiveDefinite("HermitianPd: pivot " + std::to_string(j) + " is " + std::to_string(d));
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      logdet_ += 2.0 * std::log(ljj);
      for (std::size_t i = j + 1; i < n; ++i) {
        cdouble s = a_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * std::conj(l_(j, k));
        l_(i, j) = s / ljj;
      }
    }
  }

  CMatrix a_;
  CMatrix l_;
  double logdet_ = 0.0;
};

}  // namespace ssdet
