#pragma once

// min over masked X of ||A - A X C||_2^2.
//
// Convex but nonsmooth. Stage one is a multi-start normalized subgradient
// method with iterate averaging; stage two polishes the best point on a
// log-sum-exp smoothing of the eigenvalues of R^T R with L-BFGS, shrinking the
// smoothing parameter. Whatever the stages do, the returned r is the exact
// squared norm at the returned X, so it is always a valid upper bound.

#include "ise/gains.hpp"
#include "ise/linalg.hpp"
#include "ise/rng.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace ise {

struct NormSolverOptions {
  int restarts = 20;
  int iterations = 2000;
  double step_scale = 0.1;  // c = step_scale * ||A||_2
  double tolerance = 1e-10;
  bool refine = true;
  int refine_iterations = 300;  // per smoothing level
  std::uint64_t seed = 0x5EEDULL;
};

struct StructuredNormResult {
  double r = 0.0;
  Matrix X;
  bool iteration_limit = false;
};

inline Matrix residual(const Matrix& A, const Matrix& C, const Matrix& X) { return A - A * X * C; }

inline double residual_norm_sq(const Matrix& A, const Matrix& C, const Matrix& X) {
  const double s = spectral_norm(residual(A, C, X));
  return s * s;
}

namespace detail {

// Free entries of a mask in column-major order.
inline std::vector<Index> free_entries(const MaskPattern& p) {
  std::vector<Index> idx;
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i)
      if (p(i, j)) idx.push_back(j * p.rows() + i);
  return idx;
}

inline Vector pack(const Matrix& X, const std::vector<Index>& idx) {
  Vector z(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) z(static_cast<Index>(k)) = X.data()[idx[k]];
  return z;
}

inline Matrix unpack(const Vector& z, const std::vector<Index>& idx, Index rows, Index cols) {
  Matrix X = Matrix::Zero(rows, cols);
  for (std::size_t k = 0; k < idx.size(); ++k) X.data()[idx[k]] = z(static_cast<Index>(k));
  return X;
}

// Masked Frobenius least squares: min ||A - A X C||_F, vec(A X C) = (C^T kron A) vec(X).
inline Matrix masked_least_squares(const Matrix& A, const Matrix& C, const std::vector<Index>& idx, Index rows,
                                   Index cols) {
  if (idx.empty()) return Matrix::Zero(rows, cols);
  const Matrix K = kron(C.transpose(), A);
  Matrix Kf(K.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) Kf.col(static_cast<Index>(k)) = K.col(idx[k]);
  const Vector b = Eigen::Map<const Vector>(A.data(), A.size());
  const Vector z = Kf.completeOrthogonalDecomposition().solve(b);
  return unpack(z, idx, rows, cols);
}

// Smoothed max eigenvalue of R^T R and its gradient in the free entries.
inline double smoothed_value(const Matrix& A, const Matrix& C, const std::vector<Index>& idx, const Vector& z,
                             double mu, Index rows, Index cols, Vector* grad) {
  const Matrix X = unpack(z, idx, rows, cols);
  const Matrix R = residual(A, C, X);
  Eigen::SelfAdjointEigenSolver<Matrix> es(R.transpose() * R);
  const Vector& lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  Vector w = ((lam.array() - top) / mu).exp().matrix();
  const double s = w.sum();
  const double value = top + mu * std::log(s);
  if (grad) {
    w /= s;
    const Matrix U = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
    const Matrix G = -2.0 * A.transpose() * R * U * C.transpose();
    *grad = pack(G, idx);
  }
  return value;
}

using Objective = std::function<double(const Vector&, Vector*)>;

// Plain L-BFGS with backtracking Armijo steps. Returns true when the gradient
// or the relative decrease fell below tol before max_iter.
inline bool lbfgs(const Objective& f, Vector& z, int max_iter, double tol, int memory = 8) {
  Vector g;
  double fz = f(z, &g);
  std::deque<Vector> S, Y;
  std::deque<double> rho;
  for (int it = 0; it < max_iter; ++it) {
    if (g.norm() <= tol * std::max(1.0, std::abs(fz))) return true;
    // two-loop recursion
    Vector q = g;
    std::vector<double> a(S.size());
    for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
      a[k] = rho[k] * S[k].dot(q);
      q -= a[k] * Y[k];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double b = rho[k] * Y[k].dot(q);
      q += (a[k] - b) * S[k];
    }
    Vector d = -q;
    if (d.dot(g) >= 0) {
      d = -g;
      S.clear();
      Y.clear();
      rho.clear();
    }
    double step = 1.0;
    if (S.empty()) step = 1.0 / std::max(1.0, g.norm());
    Vector zn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      zn = z + step * d;
      fn = f(zn, &gn);
      if (std::isfinite(fn) && fn <= fz + 1e-4 * step * d.dot(g)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return true;  // no descent possible at this resolution
    const Vector s = zn - z, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    const double decrease = fz - fn;
    z = zn;
    g = gn;
    fz = fn;
    if (decrease <= tol * std::max(1.0, std::abs(fz))) return true;
  }
  return false;
}

}  // namespace detail

// warm_starts must already respect the mask (e.g. minimizers over a sub-mask);
// they make r monotone under mask nesting.
inline StructuredNormResult min_structured_norm(const Matrix& A, const Matrix& C, const BlockDims& d,
                                                StructuredMask mask, const NormSolverOptions& opts = {},
                                                const std::vector<Matrix>& warm_starts = {}) {
  const Index n = d.n(), m = d.m();
  if (A.rows() != n || A.cols() != n || C.rows() != m || C.cols() != n)
    throw std::invalid_argument("min_structured_norm: dimension mismatch");
  const MaskPattern pattern = mask_pattern(mask, d);
  const std::vector<Index> idx = detail::free_entries(pattern);

  StructuredNormResult best;
  best.X = Matrix::Zero(n, m);
  best.r = residual_norm_sq(A, C, best.X);
  auto consider = [&](const Matrix& X) {
    const double r = residual_norm_sq(A, C, X);
    if (r < best.r) {
      best.r = r;
      best.X = X;
    }
  };

  for (const Matrix& W : warm_starts) {
    if (!satisfies_mask(W, mask, d)) throw std::invalid_argument("min_structured_norm: warm start violates mask");
    consider(W);
  }
  const double normA = spectral_norm(A);
  if (idx.empty() || normA == 0.0 || C.isZero(0.0)) return best;

  std::vector<Matrix> starts = warm_starts;
  starts.push_back(Matrix::Zero(n, m));
  const Matrix Xls = detail::masked_least_squares(A, C, idx, n, m);
  starts.push_back(Xls);
  consider(Xls);
  SeededRng rng(opts.seed, static_cast<std::uint64_t>(mask));
  const double scale = std::max(1.0, max_abs(Xls));
  while (static_cast<int>(starts.size()) < opts.restarts) {
    Matrix R = Matrix::Zero(n, m);
    for (Index k : idx) R.data()[k] = scale * rng.normal();
    starts.push_back(Xls + R);
  }

  // Stage one: subgradient descent on ||R||_2 (not squared), steps in objective units.
  const double c = opts.step_scale * normA;
  for (const Matrix& X0 : starts) {
    Matrix X = X0, avg = Matrix::Zero(n, m);
    double wsum = 0.0;
    for (int k = 1; k <= opts.iterations; ++k) {
      const Matrix R = residual(A, C, X);
      Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const double s = svd.singularValues()(0);
      if (s * s < best.r) {
        best.r = s * s;
        best.X = X;
      }
      if (s == 0.0) break;
      const Matrix G =
          apply_mask(-A.transpose() * svd.matrixU().col(0) * svd.matrixV().col(0).transpose() * C.transpose(), mask, d);
      const double gg = G.squaredNorm();
      if (gg == 0.0) break;
      const double step = c / std::sqrt(static_cast<double>(k));
      X -= (step / gg) * G;
      avg += step * X;
      wsum += step;
    }
    if (wsum > 0.0) consider(avg / wsum);
  }

  // Stage two: smoothing continuation from the best point.
  bool converged = true;
  if (opts.refine) {
    Vector z = detail::pack(best.X, idx);
    const double lam_scale = std::max(best.r, 1e-12 * normA * normA);
    const double mu_floor = 1e-10 * std::max(lam_scale, normA * normA);
    for (double mu = 0.1 * lam_scale; mu >= mu_floor; mu *= 0.1) {
      const detail::Objective f = [&](const Vector& v, Vector* g) {
        return detail::smoothed_value(A, C, idx, v, mu, n, m, g);
      };
      converged = detail::lbfgs(f, z, opts.refine_iterations, opts.tolerance);
      consider(detail::unpack(z, idx, n, m));
    }
  }
  best.iteration_limit = !converged;
  // below this the residual is rounding noise in A - AXC
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * normA;
  if (best.r < floor * floor) best.r = 0.0;
  return best;
}

}  // namespace ise
