#pragma once

// Covariance maps under random delays, the Y-iteration, the Omega certificate,
// the r1..r4 boundedness test and the critical-probability bounds.

#include "ise/csv.hpp"
#include "ise/filter.hpp"
#include "ise/gains.hpp"
#include "ise/model.hpp"
#include "ise/structured_norm.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ise {

// ---- operators ------------------------------------------------------------

// Q(X, Y) = (A - A X C) Y (A - A X C)^T
inline Matrix op_Q(const Matrix& X, const Matrix& Y, const SystemModel& model) {
  const Matrix R = residual(model.A, model.C(), X);
  return R * Y * R.transpose();
}

// M(X) = A X V X^T A^T
inline Matrix op_M(const Matrix& X, const SystemModel& model) {
  const Matrix AX = model.A * X;
  return AX * model.V * AX.transpose();
}

// G(X) = (A - A X C)^T (A - A X C)
inline Matrix op_G(const Matrix& X, const SystemModel& model) {
  const Matrix R = residual(model.A, model.C(), X);
  return R.transpose() * R;
}

inline Matrix op_T(const Matrix& X, const Matrix& Y, const SystemModel& model) {
  return symmetrize(op_Q(X, Y, model) + op_M(X, model) + model.W);
}

struct GTerms {
  GainSet gains;
  std::array<Matrix, 4> T;  // indexed like kAllOutcomes: 00, 01, 10, 11
};

inline GTerms g_terms(const Matrix& Y, const SystemModel& model) {
  GTerms out;
  out.gains = optimal_gains(model, Y);
  for (std::size_t k = 0; k < kAllOutcomes.size(); ++k) out.T[k] = op_T(out.gains[kAllOutcomes[k]], Y, model);
  return out;
}

// g(Y) = sum over outcomes of Pr(outcome) T(Delta^outcome[Y], Y).
inline Matrix g_map(const Matrix& Y, const SystemModel& model, const DelayModel& delays) {
  const GainSet gains = optimal_gains(model, Y);
  Matrix out = Matrix::Zero(model.n(), model.n());
  for (DelayOutcome o : kAllOutcomes) {
    const double p = outcome_probability(delays, o);
    if (p != 0.0) out += p * op_T(gains[o], Y, model);
  }
  return symmetrize(out);
}

// h(Y) = lambda1 lambda2 T(Delta^00[Y], Y)
inline Matrix h_map(const Matrix& Y, const SystemModel& model, const DelayModel& delays) {
  const double p = delays.lambda1 * delays.lambda2;
  return p * op_T(optimal_gains(model, Y).d00, Y, model);
}

// ---- Y-iteration ----------------------------------------------------------

struct IterationOptions {
  double divergence_factor = 1e12;  // diverged once trace > factor * trace(W)
  double plateau_tol = 1e-8;        // relative trace change
};

struct YSequence {
  std::vector<Matrix> Y;      // Y[k] bounds E(P_{k+1}); Y[0] = A Sigma0 A^T + W
  std::vector<double> trace;  // trace of Y[k]
  bool diverged = false;
  bool plateau = false;
  std::size_t plateau_index = 0;  // first k with relative change below tol

  static std::size_t time_of(std::size_t k) { return k + 1; }
};

template <class Map>
YSequence iterate_map(const SystemModel& model, std::size_t steps, const IterationOptions& opts, Map&& map) {
  if (steps < 1) throw std::invalid_argument("iteration needs at least one step");
  const double threshold = opts.divergence_factor * std::max(model.W.trace(), 1e-300);
  YSequence seq;
  seq.Y.push_back(first_prior(model));
  seq.trace.push_back(seq.Y.back().trace());
  for (std::size_t k = 1; k <= steps; ++k) {
    Matrix next = map(seq.Y.back());
    const double tr = next.trace();
    if (!std::isfinite(tr) || tr > threshold) {
      seq.diverged = true;
      break;
    }
    const double prev = seq.trace.back();
    seq.Y.push_back(std::move(next));
    seq.trace.push_back(tr);
    if (!seq.plateau && std::abs(tr - prev) <= opts.plateau_tol * std::max(std::abs(tr), 1e-300)) {
      seq.plateau = true;
      seq.plateau_index = k;
    }
  }
  return seq;
}

inline YSequence iterate_Y(const SystemModel& model, const DelayModel& delays, std::size_t steps,
                           const IterationOptions& opts = {}) {
  return iterate_map(model, steps, opts, [&](const Matrix& Y) { return g_map(Y, model, delays); });
}

inline YSequence iterate_h(const SystemModel& model, const DelayModel& delays, std::size_t steps,
                           const IterationOptions& opts = {}) {
  return iterate_map(model, steps, opts, [&](const Matrix& Y) { return h_map(Y, model, delays); });
}

// ---- Omega -----------------------------------------------------------------

// X1: n1 x m1, X2: n2 x m2, X3: n x m1, X4: n2 x m2, X5: n1 x m1, X6: n x m2, X7: n x m.
struct OmegaCertificate {
  std::array<Matrix, 7> X;
  double rho = 0.0;
};

// The four structured gains the seven blocks assemble into, in kAllOutcomes order.
inline std::array<Matrix, 4> omega_gains(const std::array<Matrix, 7>& X, const BlockDims& d) {
  const Index n = d.n(), m = d.m();
  auto shape = [](const Matrix& M, Index r, Index c, int which) {
    if (M.rows() != r || M.cols() != c)
      throw std::invalid_argument("omega: X" + std::to_string(which) + " has the wrong shape");
  };
  shape(X[0], d.n1, d.m1, 1);
  shape(X[1], d.n2, d.m2, 2);
  shape(X[2], n, d.m1, 3);
  shape(X[3], d.n2, d.m2, 4);
  shape(X[4], d.n1, d.m1, 5);
  shape(X[5], n, d.m2, 6);
  shape(X[6], n, m, 7);

  std::array<Matrix, 4> g;
  g[0] = Matrix::Zero(n, m);  // 00
  g[0].topLeftCorner(d.n1, d.m1) = X[0];
  g[0].bottomRightCorner(d.n2, d.m2) = X[1];
  g[1] = Matrix::Zero(n, m);  // 01
  g[1].leftCols(d.m1) = X[2];
  g[1].bottomRightCorner(d.n2, d.m2) = X[3];
  g[2] = Matrix::Zero(n, m);  // 10
  g[2].topLeftCorner(d.n1, d.m1) = X[4];
  g[2].rightCols(d.m2) = X[5];
  g[3] = X[6];  // 11
  return g;
}

inline Matrix omega_matrix(const SystemModel& model, const DelayModel& delays, const std::array<Matrix, 7>& X) {
  const std::array<Matrix, 4> g = omega_gains(X, model.dims());
  const Index n = model.n();
  Matrix O = Matrix::Zero(n * n, n * n);
  const Matrix C = model.C();
  for (std::size_t k = 0; k < 4; ++k) {
    const double p = outcome_probability(delays, kAllOutcomes[k]);
    if (p == 0.0) continue;
    const Matrix R = residual(model.A, C, g[k]);
    O += p * kron(R, R);
  }
  return O;
}

inline double omega_rho(const SystemModel& model, const DelayModel& delays, const std::array<Matrix, 7>& X) {
  return spectral_radius(omega_matrix(model, delays, X));
}

// Splits four masked gains (00, 01, 10, 11) back into X1..X7.
inline std::array<Matrix, 7> omega_blocks(const std::array<Matrix, 4>& g, const BlockDims& d) {
  const StructuredMask masks[4] = {StructuredMask::BlockDiag, StructuredMask::LowerBlock, StructuredMask::UpperBlock,
                                   StructuredMask::Full};
  for (int k = 0; k < 4; ++k)
    if (!satisfies_mask(g[k], masks[k], d)) throw std::invalid_argument("omega: gain violates its mask");
  std::array<Matrix, 7> X;
  X[0] = g[0].topLeftCorner(d.n1, d.m1);
  X[1] = g[0].bottomRightCorner(d.n2, d.m2);
  X[2] = g[1].leftCols(d.m1);
  X[3] = g[1].bottomRightCorner(d.n2, d.m2);
  X[4] = g[2].topLeftCorner(d.n1, d.m1);
  X[5] = g[2].rightCols(d.m2);
  X[6] = g[3];
  return X;
}

// ---- boundedness test -----------------------------------------------------

struct RValues {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0;
  Matrix X1, X2, X3, X4;  // certificates: BlockDiag, LowerBlock, UpperBlock, Full
  bool iteration_limit = false;
};

// r2 and r3 start from the r1 certificate, r4 from both of theirs, so the
// nesting r4 <= min(r2, r3) <= max(r2, r3) <= r1 holds by construction.
inline RValues compute_r_values(const SystemModel& model, const NormSolverOptions& opts = {}) {
  const Matrix C = model.C();
  const BlockDims d = model.dims();
  RValues rv;
  const auto a = min_structured_norm(model.A, C, d, StructuredMask::BlockDiag, opts);
  const auto b = min_structured_norm(model.A, C, d, StructuredMask::LowerBlock, opts, {a.X});
  const auto c = min_structured_norm(model.A, C, d, StructuredMask::UpperBlock, opts, {a.X});
  const auto e = min_structured_norm(model.A, C, d, StructuredMask::Full, opts, {b.X, c.X});
  rv.r1 = a.r;
  rv.r2 = b.r;
  rv.r3 = c.r;
  rv.r4 = e.r;
  rv.X1 = a.X;
  rv.X2 = b.X;
  rv.X3 = c.X;
  rv.X4 = e.X;
  rv.iteration_limit = a.iteration_limit || b.iteration_limit || c.iteration_limit || e.iteration_limit;
  return rv;
}

inline double weighted_sum(const RValues& rv, const DelayModel& dl) {
  const double l1 = dl.lambda1, l2 = dl.lambda2;
  return rv.r1 * l1 * l2 + rv.r2 * l1 * (1 - l2) + rv.r3 * (1 - l1) * l2 + rv.r4 * (1 - l1) * (1 - l2);
}

enum class Verdict { BoundedCertified, Inconclusive };

inline const char* verdict_name(Verdict v) {
  return v == Verdict::BoundedCertified ? "BoundedCertified" : "Inconclusive";
}

struct BoundednessReport {
  DelayModel delays;
  RValues r;
  double weighted_sum = 0.0;
  Verdict verdict = Verdict::Inconclusive;

  std::array<Matrix, 4> certificates() const { return {r.X1, r.X2, r.X3, r.X4}; }
};

inline BoundednessReport boundedness_test(const RValues& rv, const DelayModel& delays) {
  BoundednessReport rep;
  rep.delays = delays;
  rep.r = rv;
  rep.weighted_sum = weighted_sum(rv, delays);
  rep.verdict = rep.weighted_sum <= 1.0 ? Verdict::BoundedCertified : Verdict::Inconclusive;
  return rep;
}

inline BoundednessReport boundedness_test(const SystemModel& model, const DelayModel& delays,
                                          const NormSolverOptions& opts = {}) {
  return boundedness_test(compute_r_values(model, opts), delays);
}

// ---- alpha and the critical probability ------------------------------------

class Inapplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AlphaResult {
  double alpha = 0.0;
  Matrix X;                     // block-diagonal projector gain
  bool minimizes_alpha = true;  // no sampled X gave a smaller lambda_min(f)
  bool loewner_minimal = true;  // no sampled X gave f(X) - f(X*) with a negative eigenvalue
  double worst_gap = 0.0;       // most negative lambda_min(f(X) - f(X*)) seen
};

// f(X1, X2) = G(diag(X1, X2)). With full-row-rank C blocks the projector
// X_i = C_i^T (C_i C_i^T)^-1 is used; 100 random block-diagonal X are sampled
// as a spot check.
inline AlphaResult alpha_value(const SystemModel& model, std::uint64_t seed = 0xA1FAULL, int samples = 100) {
  const BlockDims d = model.dims();
  const double tolr = 1e-9;
  if (numerical_rank(model.C1, tolr) < model.m1 || numerical_rank(model.C2, tolr) < model.m2)
    throw Inapplicable("alpha needs full row rank C1 and C2");
  auto proj = [](const Matrix& Ci) {
    const Matrix CCt = Ci * Ci.transpose();
    return Matrix(CCt.ldlt().solve(Ci).transpose());
  };
  AlphaResult out;
  out.X = block_diagonal(proj(model.C1), proj(model.C2));
  const Matrix f_star = symmetrize(op_G(out.X, model));
  out.alpha = std::max(0.0, min_eigenvalue(f_star));

  SeededRng rng(seed, 0);
  const double scale = std::max(1.0, max_abs(out.X));
  for (int s = 0; s < samples; ++s) {
    Matrix X = out.X;
    for (Index j = 0; j < X.cols(); ++j)
      for (Index i = 0; i < X.rows(); ++i) X(i, j) += scale * rng.normal();
    X = apply_mask(X, StructuredMask::BlockDiag, d);
    const Matrix f = symmetrize(op_G(X, model));
    if (min_eigenvalue(f) < out.alpha - 1e-8) out.minimizes_alpha = false;
    const double gap = min_eigenvalue(f - f_star);
    out.worst_gap = std::min(out.worst_gap, gap);
    if (gap < -1e-8) out.loewner_minimal = false;
  }
  return out;
}

struct CriticalBounds {
  int fixed_which = 1;  // which lambda is held
  double lambda_fixed = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  std::optional<double> alpha;  // empty when C blocks are not full row rank
  std::optional<double> empirical;
  bool h_diverges = false;  // h-iteration at free lambda = 1 blew up
};

// r values are compared against 1, so 1 is the floor of the relative scale.
inline bool r_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({std::abs(a), std::abs(b), 1.0}); }

// Lower bound from the weighted-sum condition, upper from alpha.
inline CriticalBounds critical_bounds(const RValues& rv, std::optional<double> alpha, double lambda_fixed,
                                      int fixed_which) {
  if (fixed_which != 1 && fixed_which != 2) throw std::invalid_argument("fixed_which must be 1 or 2");
  if (!(lambda_fixed >= 0.0 && lambda_fixed <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  CriticalBounds cb;
  cb.fixed_which = fixed_which;
  cb.lambda_fixed = lambda_fixed;
  cb.alpha = alpha;
  const double l = lambda_fixed;

  if (r_equal(rv.r1, rv.r4)) {
    const bool ok = rv.r1 <= 1.0;
    cb.lower = ok ? 1.0 : 0.0;
    cb.upper = ok ? 1.0 : (alpha && *alpha * l > 0.0 ? std::min(1.0 / (*alpha * l), 1.0) : 1.0);
    return cb;
  }

  // Free lambda x enters linearly: num >= x * den.
  double num, den;
  if (fixed_which == 1) {
    num = 1.0 - rv.r2 * l - rv.r4 * (1 - l);
    den = (rv.r1 - rv.r2) * l + (rv.r3 - rv.r4) * (1 - l);
  } else {
    num = 1.0 - rv.r3 * l - rv.r4 * (1 - l);
    den = (rv.r1 - rv.r3) * l + (rv.r2 - rv.r4) * (1 - l);
  }
  double lower;
  if (den <= 0.0)
    lower = num >= 0.0 ? 1.0 : 0.0;
  else
    lower = num / den;
  cb.lower = std::clamp(lower, 0.0, 1.0);

  if (alpha && *alpha * l > 0.0)
    cb.upper = std::min(1.0 / (*alpha * l), 1.0);
  else
    cb.upper = 1.0;
  return cb;
}

inline std::optional<double> try_alpha(const SystemModel& model) {
  try {
    return alpha_value(model).alpha;
  } catch (const Inapplicable&) {
    return std::nullopt;
  }
}

inline DelayModel with_free(int fixed_which, double fixed, double free_value) {
  return fixed_which == 1 ? DelayModel::make(fixed, free_value) : DelayModel::make(free_value, fixed);
}

struct EmpiricalOptions {
  std::size_t horizon = 500;
  double divergence_factor = 1e12;
  double bisect_tol = 0.01;
};

struct EmpiricalCritical {
  double estimate = 1.0;
  double lo = 1.0;  // largest free lambda seen bounded
  double hi = 1.0;  // smallest free lambda seen diverging
  bool h_diverges = false;
};

inline bool y_diverges(const SystemModel& model, const DelayModel& delays, const EmpiricalOptions& o) {
  return iterate_Y(model, delays, o.horizon, {o.divergence_factor, 1e-8}).diverged;
}

// Bisection on the free probability using Y-divergence within the horizon.
inline EmpiricalCritical empirical_critical(const SystemModel& model, double lambda_fixed, int fixed_which,
                                            const EmpiricalOptions& o = {}) {
  EmpiricalCritical ec;
  ec.h_diverges =
      iterate_h(model, with_free(fixed_which, lambda_fixed, 1.0), o.horizon, {o.divergence_factor, 1e-8}).diverged;
  if (!y_diverges(model, with_free(fixed_which, lambda_fixed, 1.0), o)) {
    ec.estimate = ec.lo = ec.hi = 1.0;
    return ec;
  }
  if (y_diverges(model, with_free(fixed_which, lambda_fixed, 0.0), o)) {
    ec.estimate = ec.lo = ec.hi = 0.0;
    return ec;
  }
  double lo = 0.0, hi = 1.0;
  while (hi - lo > o.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    if (y_diverges(model, with_free(fixed_which, lambda_fixed, mid), o))
      hi = mid;
    else
      lo = mid;
  }
  ec.lo = lo;
  ec.hi = hi;
  ec.estimate = 0.5 * (lo + hi);
  return ec;
}

// ---- reports ---------------------------------------------------------------

inline void write_boundedness_text(std::ostream& os, const BoundednessReport& rep) {
  const RValues& r = rep.r;
  if (r.r1 == 0.0 && r.r2 == 0.0 && r.r3 == 0.0 && r.r4 == 0.0)
    os << "all r = 0; " << verdict_name(rep.verdict) << '\n';
  os << "lambda1 = " << format_double(rep.delays.lambda1) << '\n'
     << "lambda2 = " << format_double(rep.delays.lambda2) << '\n'
     << "r1 = " << format_double(r.r1) << '\n'
     << "r2 = " << format_double(r.r2) << '\n'
     << "r3 = " << format_double(r.r3) << '\n'
     << "r4 = " << format_double(r.r4) << '\n'
     << "weighted_sum = " << format_double(rep.weighted_sum) << '\n'
     << "verdict = " << verdict_name(rep.verdict) << '\n';
  if (r.iteration_limit) os << "note = solver hit its iteration limit; r values are upper bounds\n";
}

inline void write_boundedness_csv(std::ostream& os, const BoundednessReport& rep) {
  const RValues& r = rep.r;
  os << "lambda1,lambda2,r1,r2,r3,r4,weighted_sum,verdict\n"
     << format_double(rep.delays.lambda1) << ',' << format_double(rep.delays.lambda2) << ',' << format_double(r.r1)
     << ',' << format_double(r.r2) << ',' << format_double(r.r3) << ',' << format_double(r.r4) << ','
     << format_double(rep.weighted_sum) << ',' << verdict_name(rep.verdict) << '\n';
}

inline void write_critical_csv(std::ostream& os, const CriticalBounds& cb) {
  os << "fixed,lambda_fixed,lower,upper,alpha,empirical,h_diverges\n"
     << "lambda" << cb.fixed_which << ',' << format_double(cb.lambda_fixed) << ',' << format_double(cb.lower) << ','
     << format_double(cb.upper) << ',' << (cb.alpha ? format_double(*cb.alpha) : std::string("NA")) << ','
     << (cb.empirical ? format_double(*cb.empirical) : std::string("NA")) << ',' << int(cb.h_diverges) << '\n';
}

inline void write_critical_text(std::ostream& os, const CriticalBounds& cb) {
  os << "fixed = lambda" << cb.fixed_which << " = " << format_double(cb.lambda_fixed) << '\n'
     << "lower = " << format_double(cb.lower) << '\n'
     << "upper = " << format_double(cb.upper) << '\n'
     << "alpha = " << (cb.alpha ? format_double(*cb.alpha) : std::string("unavailable")) << '\n';
  if (cb.empirical) os << "empirical = " << format_double(*cb.empirical) << '\n';
  os << "h_diverges = " << (cb.h_diverges ? "yes" : "no") << '\n';
}

}  // namespace ise
