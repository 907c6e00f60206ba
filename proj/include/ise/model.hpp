#pragma once

// Two-subsystem interconnected plant, Bernoulli delay model, and the
// power-system fixtures.

#include "ise/linalg.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ise {

// Partition sizes: state n = n1 + n2, measurement m = m1 + m2.
struct BlockDims {
  Index n1 = 0;
  Index n2 = 0;
  Index m1 = 0;
  Index m2 = 0;

  Index n() const { return n1 + n2; }
  Index m() const { return m1 + m2; }
  bool operator==(const BlockDims&) const = default;
};

struct SystemModel {
  Index n1 = 0;
  Index n2 = 0;
  Index m1 = 0;
  Index m2 = 0;
  Matrix A;       // n x n, blocks A11 A12 / A21 A22
  Matrix C1;      // m1 x n1
  Matrix C2;      // m2 x n2
  Matrix W;       // process noise covariance, n x n
  Matrix V;       // measurement noise covariance, m x m
  Matrix Sigma0;  // initial state covariance, n x n

  BlockDims dims() const { return {n1, n2, m1, m2}; }
  Index n() const { return n1 + n2; }
  Index m() const { return m1 + m2; }

  // Stacked block-diagonal measurement matrix diag(C1, C2).
  Matrix C() const { return block_diagonal(C1, C2); }

  Matrix A_block(int i, int j) const {
    const Index r0 = i == 1 ? 0 : n1, c0 = j == 1 ? 0 : n1;
    const Index rs = i == 1 ? n1 : n2, cs = j == 1 ? n1 : n2;
    return A.block(r0, c0, rs, cs);
  }
};

// Bernoulli delay probabilities: Pr(gamma^i = 0) = lambda_i.
struct DelayModel {
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  static DelayModel make(double l1, double l2) {
    auto ok = [](double l) { return l >= 0.0 && l <= 1.0; };
    if (!ok(l1) || !ok(l2)) throw std::invalid_argument("delay probabilities must lie in [0, 1]");
    return {l1, l2};
  }
};

// Realized delay indicators. gamma1 = 1 means subsystem 1 received y2 on time.
struct DelayOutcome {
  bool gamma1 = true;
  bool gamma2 = true;

  // "g1g2", first digit is gamma1.
  std::string label() const { return std::string{gamma1 ? '1' : '0', gamma2 ? '1' : '0'}; }

  static DelayOutcome parse(std::string_view s) {
    if (s.size() != 2 || (s[0] != '0' && s[0] != '1') || (s[1] != '0' && s[1] != '1'))
      throw std::invalid_argument("delay outcome must be one of 00, 01, 10, 11");
    return {s[0] == '1', s[1] == '1'};
  }

  bool operator==(const DelayOutcome&) const = default;
};

inline constexpr DelayOutcome kOutcome00{false, false};
inline constexpr DelayOutcome kOutcome01{false, true};
inline constexpr DelayOutcome kOutcome10{true, false};
inline constexpr DelayOutcome kOutcome11{true, true};
inline constexpr std::array<DelayOutcome, 4> kAllOutcomes{kOutcome00, kOutcome01, kOutcome10, kOutcome11};

inline double outcome_probability(const DelayModel& d, DelayOutcome o) {
  const double p1 = o.gamma1 ? 1.0 - d.lambda1 : d.lambda1;
  const double p2 = o.gamma2 ? 1.0 - d.lambda2 : d.lambda2;
  return p1 * p2;
}

// Selector matrices used by the gain formulas and the per-subsystem update.
struct SelectorSet {
  Matrix Xi1;     // m1 x m: [I 0]
  Matrix Xi2;     // m2 x m: [0 I]
  Matrix Xi3;     // n x n2: [0; I]
  Matrix Xi4;     // n x n1: [I; 0]
  Matrix Xi1bar;  // n1 x n: [I 0]
  Matrix Xi2bar;  // m x m1: [I; 0]
  Matrix Xi3bar;  // m x m2: [0; I]
  Matrix Xi4bar;  // n2 x n: [0 I]
};

inline SelectorSet make_selectors(const BlockDims& d) {
  SelectorSet s;
  const Index n = d.n(), m = d.m();
  s.Xi1 = Matrix::Zero(d.m1, m);
  s.Xi1.leftCols(d.m1).setIdentity();
  s.Xi2 = Matrix::Zero(d.m2, m);
  s.Xi2.rightCols(d.m2).setIdentity();
  s.Xi3 = Matrix::Zero(n, d.n2);
  s.Xi3.bottomRows(d.n2).setIdentity();
  s.Xi4 = Matrix::Zero(n, d.n1);
  s.Xi4.topRows(d.n1).setIdentity();
  s.Xi1bar = Matrix::Zero(d.n1, n);
  s.Xi1bar.leftCols(d.n1).setIdentity();
  s.Xi2bar = Matrix::Zero(m, d.m1);
  s.Xi2bar.topRows(d.m1).setIdentity();
  s.Xi3bar = Matrix::Zero(m, d.m2);
  s.Xi3bar.bottomRows(d.m2).setIdentity();
  s.Xi4bar = Matrix::Zero(d.n2, n);
  s.Xi4bar.rightCols(d.n2).setIdentity();
  return s;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_model(const SystemModel& model) {
  ValidationReport rep;
  auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };
  if (model.n1 <= 0 || model.n2 <= 0) fail("state dimensions n1, n2 must be positive");
  if (model.m1 <= 0 || model.m2 <= 0) fail("measurement dimensions m1, m2 must be positive");
  if (!rep.ok()) return rep;

  const Index n = model.n(), m = model.m();
  auto shape = [&](const Matrix& x, Index r, Index c, const char* name) {
    if (x.rows() != r || x.cols() != c) {
      fail(std::string(name) + " has shape " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
           ", expected " + std::to_string(r) + "x" + std::to_string(c));
      return false;
    }
    if (!x.allFinite()) {
      fail(std::string(name) + " has non-finite entries");
      return false;
    }
    return true;
  };
  shape(model.A, n, n, "A");
  shape(model.C1, model.m1, model.n1, "C1");
  shape(model.C2, model.m2, model.n2, "C2");
  auto pd = [&](const Matrix& x, Index k, const char* name) {
    if (!shape(x, k, k, name)) return;
    if (!is_symmetric(x)) fail(std::string(name) + " not symmetric");
    else if (!is_positive_definite(x)) fail(std::string(name) + " not positive definite");
  };
  pd(model.W, n, "W");
  pd(model.V, m, "V");
  pd(model.Sigma0, n, "Sigma0");
  return rep;
}

struct DiscreteSystem {
  Matrix Ad;
  Matrix Bd;
  Matrix W;
};

// Forward-Euler discretization: Ad = Ts A + I, Bd = Ts B, W = Ts^2 Q.
inline DiscreteSystem discretize(const Matrix& A_cont, const Matrix& B_cont, const Matrix& Q_cont, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("sampling time must be positive");
  if (A_cont.rows() != A_cont.cols() || B_cont.rows() != A_cont.rows() || Q_cont.rows() != A_cont.rows() ||
      Q_cont.cols() != A_cont.cols())
    throw std::invalid_argument("discretize: dimension mismatch");
  const Index n = A_cont.rows();
  return {Ts * A_cont + Matrix::Identity(n, n), Ts * B_cont, Ts * Ts * Q_cont};
}

inline Matrix close_loop(const Matrix& Ad, const Matrix& Bd, const Matrix& L) {
  if (Ad.rows() != Ad.cols() || Bd.rows() != Ad.rows() || L.rows() != Bd.cols() || L.cols() != Ad.cols())
    throw std::invalid_argument("close_loop: dimension mismatch");
  return Ad + Bd * L;
}

// PBH test: rank [A - zI; C] = n at every eigenvalue with |z| >= 1.
inline bool detectable_full(const Matrix& A, const Matrix& C) {
  if (A.rows() != A.cols() || C.cols() != A.cols()) throw std::invalid_argument("detectable_full: dimension mismatch");
  const Index n = A.rows();
  if (n == 0) return true;
  using CMatrix = Eigen::MatrixXcd;
  Eigen::EigenSolver<Matrix> es(A, false);
  for (Index k = 0; k < n; ++k) {
    const std::complex<double> z = es.eigenvalues()(k);
    if (std::abs(z) < 1.0 - 1e-12) continue;
    CMatrix pbh(n + C.rows(), n);
    pbh.topRows(n) = A.cast<std::complex<double>>() - z * CMatrix::Identity(n, n);
    pbh.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    if (numerical_rank(pbh, 1e-9) < n) return false;
  }
  return true;
}

// Continuous-time power-system data (4 PCC voltage deviations, 4 DER inputs).
struct PowerSystemData {
  Matrix A;
  Matrix B;
  Matrix L_stable;
  Matrix L_unstable;
  Matrix Ac_stable;    // printed closed loop, stable controller
  Matrix Ac_unstable;  // printed closed loop, unstable controller
  double Ts = 0.05;
};

inline Matrix rows4(std::initializer_list<double> v) {
  Matrix m(4, 4);
  auto it = v.begin();
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = *it++;
  return m;
}

inline PowerSystemData power_system_data() {
  PowerSystemData d;
  d.A = rows4({175.9, 176.8, 511, 1036,  //
               -350, 0, 0, 0,            //
               -544.2, -474.8, -408.8, -828.8,
               -119.7, -554.6, -968.8, -1077.5});
  d.B = rows4({0.8, 334.2, 525.1, -103.6,  //
               -350, 0, 0, 0,              //
               -69.3, -66.1, -420.1, -828.8,
               -434.9, -414.2, -108.7, -1077.5});
  d.L_stable = rows4({-0.9752, 0.0954, -0.0046, 0.0092,   //
                      1.2278, -0.2457, -1.4844, -1.4526,  //
                      -1.1925, -0.2489, -0.0979, -1.1097,
                      -0.0708, -0.4306, -0.3197, -0.3290});
  d.L_unstable = rows4({-0.9553, 0.1260, -0.1420, 0.0165,  //
                        1.2028, -0.2767, -1.3840, -1.4669,
                        -1.1969, -0.2184, -0.1625, -1.0997,
                        -0.0701, -0.4426, -0.2987, -0.3388});
  d.Ac_stable = rows4({-0.6696, 0.4342, -0.1680, 0.0960,  //
                       -0.4342, -0.6696, 0.0808, -0.1608,
                       0.0936, -0.1848, 0.7881, 0.2728,  //
                       0.0880, -0.1632, 0.1600, 0.7645});
  d.Ac_unstable = rows4({-1.2053, 0.7816, -0.3024, 0.1728,  //
                         -0.7816, -1.2053, 2.4854, -0.2894,
                         0.1685, -0.3326, 1.4186, 0.4910,  //
                         0.1584, 0.2938, 0.2880, 1.3761});
  return d;
}

struct Fixture {
  SystemModel model;
  DelayModel delays;
};

inline const std::array<std::string_view, 3>& fixture_names() {
  static const std::array<std::string_view, 3> names{"case1_stable", "case2_unstable", "toy_identity"};
  return names;
}

// Area 1 measures x1, x2 directly; area 2 measures x3 + x4. W = I4, V = I3, Sigma0 = I4.
inline SystemModel power_system_model(const Matrix& Ac) {
  SystemModel m;
  m.n1 = 2;
  m.n2 = 2;
  m.m1 = 2;
  m.m2 = 1;
  m.A = Ac;
  m.C1 = Matrix::Identity(2, 2);
  m.C2 = Matrix::Ones(1, 2);
  m.W = Matrix::Identity(4, 4);
  m.V = Matrix::Identity(3, 3);
  m.Sigma0 = Matrix::Identity(4, 4);
  return m;
}

inline Fixture fixture(std::string_view name) {
  if (name == "case1_stable") return {power_system_model(power_system_data().Ac_stable), {0.5, 0.5}};
  if (name == "case2_unstable") return {power_system_model(power_system_data().Ac_unstable), {0.5, 0.5}};
  if (name == "toy_identity") {
    SystemModel m;
    m.n1 = m.n2 = m.m1 = m.m2 = 1;
    m.A.resize(2, 2);
    m.A << 0.6, 0.3, 0.2, 0.5;
    m.C1 = Matrix::Identity(1, 1);
    m.C2 = Matrix::Identity(1, 1);
    m.W = Matrix::Identity(2, 2);
    m.V = Matrix::Identity(2, 2);
    m.Sigma0 = Matrix::Identity(2, 2);
    return {m, {0.5, 0.5}};
  }
  throw std::invalid_argument("unknown fixture '" + std::string(name) + "'");
}

}  // namespace ise
