// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/complex_linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cfmimo/error.hpp"

namespace cfmimo {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, cdouble fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) {
    throw ShapeError("complex matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " given " + std::to_string(entries_.size()) + " entries");
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
  return t;
}

double ComplexMatrix::max_abs() const {
  double m = 0.0;
  for (auto z : entries_) m = std::max(m, std::abs(z));
  return m;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("cannot multiply " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " by " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix difference shape mismatch");
  ComplexMatrix c = a;
  auto ce = c.entries();
  auto be = b.entries();
  for (std::size_t i = 0; i < ce.size(); ++i) ce[i] -= be[i];
  return c;
}

double hermitian_defect(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) return INFINITY;
  double d = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = r; c < a.cols(); ++c)
      d = std::max(d, std::abs(a(r, c) - std::conj(a(c, r))));
  return d;
}

namespace {

// Lower Cholesky factor in place; nullopt on a non-positive pivot.
std::optional<ComplexMatrix> cholesky(const ComplexMatrix& a, double shift) {
  const std::size_t n = a.rows();
  ComplexMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real() + shift;
    for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cdouble s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace

ComplexMatrix hermitian_solve(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols()) {
    throw ShapeError("hermitian_solve: A is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ", not square");
  }
  if (b.rows() != a.rows()) {
    throw ShapeError("hermitian_solve: B has " + std::to_string(b.rows()) + " rows, A has " +
                     std::to_string(a.rows()));
  }
#ifndef NDEBUG
  if (hermitian_defect(a) > 1e-12 * std::max(1.0, a.max_abs())) {
    throw DomainError("hermitian_solve: A is not Hermitian");
  }
#endif
  const std::size_t n = a.rows();
  auto l = cholesky(a, 0.0);
  if (!l) {
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag = std::max(diag, std::abs(a(i, i)));
    l = cholesky(a, 1e-12 * std::max(diag, 1e-300));
    if (!l) throw SingularSystemError("hermitian_solve: factorization failed after regularization");
  }
  // forward then backward substitution, column by column
  ComplexMatrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      cdouble s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= (*l)(i, k) * x(k, c);
      x(i, c) = s / (*l)(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      cdouble s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= std::conj((*l)(k, i)) * x(k, c);
      x(i, c) = s / (*l)(i, i);
    }
  }
  return x;
}

ComplexMatrix hermitian_sqrt(const ComplexMatrix& a, double tol) {
  if (a.rows() != a.cols()) throw ShapeError("hermitian_sqrt: matrix is not square");
  const auto n = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      m(r, c) = a(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  if (es.info() != Eigen::Success) throw DomainError("hermitian_sqrt: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) < -tol * scale) {
      throw DomainError("correlation matrix is not positive semidefinite (eigenvalue " +
                        std::to_string(lam(i)) + ")");
    }
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  Eigen::MatrixXcd s = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  ComplexMatrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s(r, c);
  return out;
}

}  // namespace cfmimo
