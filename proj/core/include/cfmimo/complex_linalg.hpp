// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace cfmimo {

using cdouble = std::complex<double>;

/// Dense row-major complex matrix. std::complex<double> is layout-compatible
/// with interleaved (real, imag) pairs.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols, cdouble fill = {});
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries);

  static ComplexMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cdouble& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  cdouble operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<const cdouble> entries() const { return entries_; }
  std::span<cdouble> entries() { return entries_; }

  ComplexMatrix adjoint() const;
  double max_abs() const;

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cdouble> entries_;
};

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b);

/// max |A^H - A|.
double hermitian_defect(const ComplexMatrix& a);

/// Solves A X = B for Hermitian positive-definite A by Cholesky. If the
/// factorization meets a non-positive pivot, retries once with A + eps*I
/// (eps = 1e-12 scaled by the largest diagonal entry); a second failure
/// throws SingularSystemError.
ComplexMatrix hermitian_solve(const ComplexMatrix& a, const ComplexMatrix& b);

/// Hermitian PSD square root via eigendecomposition. Throws DomainError when
/// an eigenvalue is below -tol * max|lambda|.
ComplexMatrix hermitian_sqrt(const ComplexMatrix& a, double tol = 1e-10);

}  // namespace cfmimo
