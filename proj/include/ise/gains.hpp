#pragma once

// Closed-form optimal structured estimator gains for the four delay outcomes,
// plus an independent normal-equation oracle for the same problem.
//
// With S = V + C P C^T partitioned by (m1, m2) and K = P C^T split into its
// first m1 and last m2 columns:
//   psi1 = S21, psi2 = K[:, :m1], psi3 = S11^-1,
//   psi4 = S12, psi5 = K[:, m1:], psi6 = S22^-1.

#include "ise/linalg.hpp"
#include "ise/model.hpp"

#include <vector>

namespace ise {

// Admissible zero pattern of an n x m gain.
enum class StructuredMask {
  Full,        // outcome 11
  BlockDiag,   // outcome 00
  LowerBlock,  // outcome 01: upper-right n1 x m2 block is zero
  UpperBlock,  // outcome 10: lower-left n2 x m1 block is zero
};

inline StructuredMask mask_for(DelayOutcome o) {
  if (o.gamma1 && o.gamma2) return StructuredMask::Full;
  if (!o.gamma1 && !o.gamma2) return StructuredMask::BlockDiag;
  return o.gamma2 ? StructuredMask::LowerBlock : StructuredMask::UpperBlock;
}

inline const char* mask_name(StructuredMask mask) {
  switch (mask) {
    case StructuredMask::Full: return "Full";
    case StructuredMask::BlockDiag: return "BlockDiag";
    case StructuredMask::LowerBlock: return "LowerBlock";
    case StructuredMask::UpperBlock: return "UpperBlock";
  }
  return "?";
}

using MaskPattern = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline MaskPattern mask_pattern(StructuredMask mask, const BlockDims& d) {
  MaskPattern p = MaskPattern::Constant(d.n(), d.m(), true);
  if (mask == StructuredMask::BlockDiag || mask == StructuredMask::LowerBlock)
    p.topRightCorner(d.n1, d.m2).setConstant(false);
  if (mask == StructuredMask::BlockDiag || mask == StructuredMask::UpperBlock)
    p.bottomLeftCorner(d.n2, d.m1).setConstant(false);
  return p;
}

inline Matrix apply_mask(const Matrix& x, StructuredMask mask, const BlockDims& d) {
  return mask_pattern(mask, d).select(x, Matrix::Zero(x.rows(), x.cols()));
}

// Exact zeros outside the admissible pattern.
inline bool satisfies_mask(const Matrix& x, StructuredMask mask, const BlockDims& d) {
  if (x.rows() != d.n() || x.cols() != d.m()) return false;
  const MaskPattern p = mask_pattern(mask, d);
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i)
      if (!p(i, j) && x(i, j) != 0.0) return false;
  return true;
}

struct PsiSet {
  Matrix psi1;  // m2 x m1
  Matrix psi2;  // n x m1
  Matrix psi3;  // m1 x m1
  Matrix psi4;  // m1 x m2
  Matrix psi5;  // n x m2
  Matrix psi6;  // m2 x m2
};

struct PiSet {
  Matrix pi1;  // n2 x m2
  Matrix pi2;  // m2 x m2
  Matrix pi3;  // n1 x m1
  Matrix pi4;  // m1 x m1
};

struct GainSet {
  Matrix d11;
  Matrix d01;
  Matrix d10;
  Matrix d00;

  const Matrix& operator[](DelayOutcome o) const {
    if (o.gamma1) return o.gamma2 ? d11 : d10;
    return o.gamma2 ? d01 : d00;
  }
};

namespace detail {

inline void check_gain_inputs(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d) {
  if (P.rows() != d.n() || P.cols() != d.n() || C.rows() != d.m() || C.cols() != d.n() || V.rows() != d.m() ||
      V.cols() != d.m())
    throw std::invalid_argument("gain computation: dimension mismatch");
}

inline Matrix checked_prior(const Matrix& P) {
  Matrix Ps = symmetrize(P);
  if (!Ps.allFinite()) throw std::invalid_argument("prior covariance has non-finite entries");
  if (Ps.size() && min_eigenvalue(Ps) < -1e-9 * std::max(1.0, max_abs(Ps)))
    throw std::invalid_argument("prior covariance is not positive semidefinite");
  return Ps;
}

}  // namespace detail

inline PsiSet compute_psi(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d) {
  detail::check_gain_inputs(P, C, V, d);
  const Matrix Ps = detail::checked_prior(P);
  const Matrix S = symmetrize(V + C * Ps * C.transpose());
  const Matrix K = Ps * C.transpose();
  PsiSet psi;
  psi.psi1 = S.bottomLeftCorner(d.m2, d.m1);
  psi.psi2 = K.leftCols(d.m1);
  psi.psi3 = symmetrize(spd_inverse(S.topLeftCorner(d.m1, d.m1), "S11"));
  psi.psi4 = S.topRightCorner(d.m1, d.m2);
  psi.psi5 = K.rightCols(d.m2);
  psi.psi6 = symmetrize(spd_inverse(S.bottomRightCorner(d.m2, d.m2), "S22"));
  return psi;
}

inline PiSet compute_pi(const PsiSet& psi, const BlockDims& d) {
  PiSet pi;
  const Matrix c2 = psi.psi1 * psi.psi3 * psi.psi4 * psi.psi6;  // m2 x m2
  const Matrix c4 = psi.psi4 * psi.psi6 * psi.psi1 * psi.psi3;  // m1 x m1
  pi.pi1 = (psi.psi2 * psi.psi3 * psi.psi4 * psi.psi6 - psi.psi5 * psi.psi6).bottomRows(d.n2);
  pi.pi2 = lu_inverse(Matrix::Identity(d.m2, d.m2) - c2, "I - psi1 psi3 psi4 psi6");
  pi.pi3 = (psi.psi5 * psi.psi6 * psi.psi1 * psi.psi3 - psi.psi2 * psi.psi3).topRows(d.n1);
  pi.pi4 = lu_inverse(Matrix::Identity(d.m1, d.m1) - c4, "I - psi4 psi6 psi1 psi3");
  return pi;
}

inline GainSet gains_from(const PsiSet& psi, const PiSet& pi, const Matrix& P, const Matrix& C, const Matrix& V,
                          const BlockDims& d) {
  const Index n = d.n(), m = d.m();
  GainSet g;

  // Unconstrained (Kalman) gain through a symmetric solve: K S^-1 = (S^-1 K^T)^T.
  const Matrix Ps = symmetrize(P);
  const Matrix S = symmetrize(V + C * Ps * C.transpose());
  Eigen::LDLT<Matrix> ldlt(S);
  if (ldlt.info() != Eigen::Success) throw std::domain_error("V + C P C^T factorization failed");
  g.d11 = ldlt.solve(C * Ps).transpose();

  // Subsystem 1 loses y2 (upper-right block zero).
  const Matrix k22 = pi.pi1 * pi.pi2;  // enters with a minus sign
  g.d01 = Matrix::Zero(n, m);
  Matrix left01 = psi.psi2;
  left01.bottomRows(d.n2) += k22 * psi.psi1;
  g.d01.leftCols(d.m1) = left01 * psi.psi3;
  g.d01.bottomRightCorner(d.n2, d.m2) = -k22;

  // Subsystem 2 loses y1 (lower-left block zero).
  const Matrix k11 = pi.pi3 * pi.pi4;
  g.d10 = Matrix::Zero(n, m);
  g.d10.topLeftCorner(d.n1, d.m1) = -k11;
  Matrix right10 = psi.psi5;
  right10.topRows(d.n1) += k11 * psi.psi4;
  g.d10.rightCols(d.m2) = right10 * psi.psi6;

  // Both lose the cross measurement.
  g.d00 = Matrix::Zero(n, m);
  g.d00.topLeftCorner(d.n1, d.m1) = psi.psi2.topRows(d.n1) * psi.psi3;
  g.d00.bottomRightCorner(d.n2, d.m2) = psi.psi5.bottomRows(d.n2) * psi.psi6;
  return g;
}

inline GainSet optimal_gains(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d) {
  const PsiSet psi = compute_psi(P, C, V, d);
  const PiSet pi = compute_pi(psi, d);
  return gains_from(psi, pi, P, C, V, d);
}

inline GainSet optimal_gains(const SystemModel& model, const Matrix& P) {
  return optimal_gains(P, model.C(), model.V, model.dims());
}

inline Matrix optimal_gain(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d,
                           DelayOutcome outcome) {
  return optimal_gains(P, C, V, d)[outcome];
}

// Joseph-form posterior covariance (I - Delta C) P (I - Delta C)^T + Delta V Delta^T.
inline Matrix posterior_cov(const Matrix& P, const Matrix& Delta, const Matrix& C, const Matrix& V) {
  if (Delta.rows() != P.rows() || Delta.cols() != C.rows() || C.cols() != P.cols() || V.rows() != C.rows())
    throw std::invalid_argument("posterior_cov: dimension mismatch");
  const Matrix IKC = Matrix::Identity(P.rows(), P.cols()) - Delta * C;
  return symmetrize(IKC * P * IKC.transpose() + Delta * V * Delta.transpose());
}

// Minimizes trace(posterior_cov) over masked gains by solving the normal
// equations of the quadratic in the free entries of vec(Delta):
//   trace = tr P - 2 vec(P C^T)^T vec(Delta) + vec(Delta)^T (S kron I_n) vec(Delta).
inline Matrix oracle_structured_gain(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d,
                                     StructuredMask mask) {
  detail::check_gain_inputs(P, C, V, d);
  const Index n = d.n(), m = d.m();
  const Matrix Ps = symmetrize(P);
  const Matrix S = symmetrize(V + C * Ps * C.transpose());
  const Matrix H = kron(S, Matrix::Identity(n, n));
  const Matrix K = Ps * C.transpose();
  const Vector b = Eigen::Map<const Vector>(K.data(), n * m);

  const MaskPattern pattern = mask_pattern(mask, d);
  std::vector<Index> free;
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i)
      if (pattern(i, j)) free.push_back(j * n + i);

  const Index k = static_cast<Index>(free.size());
  Matrix Hf(k, k);
  Vector bf(k);
  for (Index a = 0; a < k; ++a) {
    bf(a) = b(free[a]);
    for (Index c = 0; c < k; ++c) Hf(a, c) = H(free[a], free[c]);
  }
  const Vector z = Hf.ldlt().solve(bf);

  Matrix Delta = Matrix::Zero(n, m);
  for (Index a = 0; a < k; ++a) Delta(free[a] % n, free[a] / n) = z(a);
  return Delta;
}

// Max-abs deviation between P C^T (V + C P C^T)^-1 and [psi2 psi5] [[psi3^-1, psi4], [psi1, psi6^-1]]^-1.
inline double kalman_factorization_check(const Matrix& P, const Matrix& C, const Matrix& V, const BlockDims& d) {
  const PsiSet psi = compute_psi(P, C, V, d);
  const Matrix Ps = symmetrize(P);
  const Matrix S = V + C * Ps * C.transpose();
  const Matrix kalman = Ps * C.transpose() * lu_inverse(S, "V + C P C^T");

  Matrix left(d.n(), d.m());
  left << psi.psi2, psi.psi5;
  Matrix blocks(d.m(), d.m());
  blocks << lu_inverse(psi.psi3, "psi3"), psi.psi4, psi.psi1, lu_inverse(psi.psi6, "psi6");
  const Matrix rebuilt = left * lu_inverse(blocks, "block matrix");
  return max_abs(kalman - rebuilt);
}

}  // namespace ise
