#pragma once

// Small dense linear-algebra helpers shared by every module.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ise {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Warnings (ill-conditioned solves etc.) go through a replaceable sink.
using WarningSink = std::function<void(std::string_view)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "ise: warning: " << msg << '\n'; };
  return sink;
}

inline void warn(std::string_view msg) {
  if (warning_sink()) warning_sink()(msg);
}

inline constexpr double kConditionWarning = 1e12;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline Vector symmetric_eigenvalues(const Matrix& s) {
  if (s.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& s) {
  Vector ev = symmetric_eigenvalues(s);
  return ev.size() ? ev.minCoeff() : 0.0;
}

inline double max_eigenvalue(const Matrix& s) {
  Vector ev = symmetric_eigenvalues(s);
  return ev.size() ? ev.maxCoeff() : 0.0;
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.transpose()) <= rel_tol * std::max(1.0, max_abs(m));
}

// Positive definite with smallest eigenvalue above rel_tol times the largest.
inline bool is_positive_definite(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols() || m.size() == 0 || !is_symmetric(m)) return false;
  Vector ev = symmetric_eigenvalues(m);
  const double hi = ev.maxCoeff();
  return hi > 0.0 && ev.minCoeff() > rel_tol * hi;
}

inline bool is_positive_semidefinite(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols() || !is_symmetric(m, 1e-9)) return false;
  if (m.size() == 0) return true;
  Vector ev = symmetric_eigenvalues(m);
  return ev.minCoeff() >= -rel_tol * std::max(1.0, ev.cwiseAbs().maxCoeff());
}

// Inverse of a symmetric positive definite matrix through an LDLT factorization.
inline Matrix spd_inverse(const Matrix& s, std::string_view what = "matrix") {
  Eigen::LDLT<Matrix> ldlt(symmetrize(s));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::domain_error(std::string(what) + " is not positive definite");
  const Vector d = ldlt.vectorD();
  if (d.size() && d.minCoeff() <= 0.0) throw std::domain_error(std::string(what) + " is singular");
  if (d.size() && d.maxCoeff() / d.minCoeff() > kConditionWarning) {
    std::ostringstream os;
    os << what << " is ill-conditioned (pivot ratio " << d.maxCoeff() / d.minCoeff() << ")";
    warn(os.str());
  }
  return ldlt.solve(Matrix::Identity(s.rows(), s.cols()));
}

// Inverse of a general square matrix through a partial-pivoting LU factorization.
inline Matrix lu_inverse(const Matrix& m, std::string_view what = "matrix") {
  Eigen::PartialPivLU<Matrix> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > 0.0) || !std::isfinite(rcond)) throw std::domain_error(std::string(what) + " is singular");
  if (1.0 / rcond > kConditionWarning) {
    std::ostringstream os;
    os << what << " is ill-conditioned (rcond " << rcond << ")";
    warn(os.str());
  }
  return lu.solve(Matrix::Identity(m.rows(), m.cols()));
}

// Numerical rank from singular values, relative tolerance.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-10) {
  if (m.size() == 0) return 0;
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(m.eval());
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? static_cast<double>(sv(0)) : 0.0;
  if (top == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (static_cast<double>(sv(i)) > rel_tol * top) ++r;
  return r;
}

inline Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace ise
