#include "ise/model.hpp"

#include <gtest/gtest.h>

using namespace ise;

namespace {

SystemModel identity_model() {
  SystemModel m;
  m.n1 = m.n2 = m.m1 = m.m2 = 1;
  m.A = 0.5 * Matrix::Identity(2, 2);
  m.C1 = m.C2 = Matrix::Identity(1, 1);
  m.W = m.V = m.Sigma0 = Matrix::Identity(2, 2);
  return m;
}

bool mentions(const ValidationReport& r, const std::string& text) {
  for (const auto& v : r.violations)
    if (v.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Validate, IdentityCovariancesAreValid) { EXPECT_TRUE(validate_model(identity_model()).ok()); }

TEST(Validate, ZeroVIsRejected) {
  SystemModel m = identity_model();
  m.V = Matrix::Zero(2, 2);
  const auto rep = validate_model(m);
  EXPECT_FALSE(rep.ok());
  EXPECT_TRUE(mentions(rep, "V not positive definite"));
}

TEST(Validate, AsymmetricWIsRejected) {
  SystemModel m = identity_model();
  m.W(0, 1) = 0.3;
  EXPECT_TRUE(mentions(validate_model(m), "W not symmetric"));
}

TEST(Validate, ShapeMismatchIsReported) {
  SystemModel m = identity_model();
  m.C1 = Matrix::Identity(2, 2);
  EXPECT_FALSE(validate_model(m).ok());
}

TEST(Validate, EveryFixtureIsValid) {
  for (auto name : fixture_names()) EXPECT_TRUE(validate_model(fixture(name).model).ok()) << name;
}

TEST(Validate, PowerSystemShapes) {
  const SystemModel m = fixture("case1_stable").model;
  EXPECT_EQ(m.C().rows(), 3);
  EXPECT_EQ(m.C().cols(), 4);
  EXPECT_EQ(m.V, Matrix::Identity(3, 3));
}

TEST(Discretize, ZeroDynamicsGiveIdentity) {
  const auto d = discretize(Matrix::Zero(3, 3), Matrix::Ones(3, 1), Matrix::Identity(3, 3), 0.05);
  EXPECT_EQ(d.Ad, Matrix::Identity(3, 3));
  EXPECT_DOUBLE_EQ(d.W(0, 0), 0.0025);
  EXPECT_DOUBLE_EQ(d.W(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d.Bd(2, 0), 0.05);
}

TEST(Discretize, RejectsNonPositiveTs) {
  EXPECT_THROW(discretize(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2), 0.0), std::invalid_argument);
  EXPECT_THROW(discretize(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2), -1.0), std::invalid_argument);
}

TEST(Discretize, PowerSystemPrintedAd) {
  const auto data = power_system_data();
  const auto d = discretize(data.A, data.B, Matrix::Identity(4, 4), data.Ts);
  EXPECT_NEAR(d.Ad(0, 0), 9.795, 1e-12);
  EXPECT_NEAR(d.Ad(0, 1), 8.84, 1e-12);
  EXPECT_NEAR(d.Ad(1, 0), -17.5, 1e-12);
  EXPECT_NEAR(d.Bd(0, 1), 16.71, 1e-12);
}

TEST(CloseLoop, ZeroFeedbackIsOpenLoop) {
  const Matrix Ad = Matrix::Random(3, 3);
  EXPECT_EQ(close_loop(Ad, Matrix::Random(3, 2), Matrix::Zero(2, 3)), Ad);
}

TEST(CloseLoop, DimensionMismatchThrows) {
  EXPECT_THROW(close_loop(Matrix::Zero(3, 3), Matrix::Zero(3, 2), Matrix::Zero(3, 3)), std::invalid_argument);
}

// The printed controller is rounded to 4 decimals and B_d is large, so each
// entry can only be reproduced up to the propagated rounding.
TEST(CloseLoop, PowerSystemMatchesPrintedWithinRounding) {
  const auto data = power_system_data();
  const auto d = discretize(data.A, data.B, Matrix::Identity(4, 4), data.Ts);
  for (auto [L, printed] : {std::pair{data.L_stable, data.Ac_stable}, std::pair{data.L_unstable, data.Ac_unstable}}) {
    const Matrix Ac = close_loop(d.Ad, d.Bd, L);
    for (Index i = 0; i < 4; ++i) {
      const double bound = 0.5e-4 * (1.0 + d.Bd.row(i).cwiseAbs().sum());
      for (Index j = 0; j < 4; ++j) EXPECT_NEAR(Ac(i, j), printed(i, j), bound) << i << "," << j;
    }
  }
  EXPECT_NEAR(close_loop(d.Ad, d.Bd, data.L_stable)(0, 0), -0.6696, 2e-3);
  EXPECT_NEAR(close_loop(d.Ad, d.Bd, data.L_unstable)(0, 0), -1.2053, 2e-3);
}

TEST(Fixtures, SpectralRadii) {
  EXPECT_LT(spectral_radius(fixture("case1_stable").model.A), 1.0);
  EXPECT_GT(spectral_radius(fixture("case2_unstable").model.A), 1.0);
  EXPECT_LT(spectral_radius(fixture("toy_identity").model.A), 1.0);
}

TEST(Fixtures, PrintedEntries) {
  const Matrix A1 = fixture("case1_stable").model.A;
  EXPECT_EQ(A1(0, 0), -0.6696);
  EXPECT_EQ(A1(2, 3), 0.2728);
  EXPECT_EQ(A1(3, 3), 0.7645);
  const Matrix A2 = fixture("case2_unstable").model.A;
  EXPECT_EQ(A2(0, 0), -1.2053);
  EXPECT_EQ(A2(1, 2), 2.4854);
  EXPECT_EQ(A2(3, 3), 1.3761);
}

TEST(Fixtures, ToyShape) {
  const auto fx = fixture("toy_identity");
  EXPECT_EQ(fx.model.n1, 1);
  EXPECT_EQ(fx.model.m2, 1);
  EXPECT_EQ(fx.model.W, Matrix::Identity(2, 2));
}

TEST(Fixtures, UnknownNameThrows) { EXPECT_THROW(fixture("case3"), std::invalid_argument); }

TEST(Detectability, StableIsAlwaysDetectable) {
  EXPECT_TRUE(detectable_full(0.5 * Matrix::Identity(3, 3), Matrix::Zero(1, 3)));
}

TEST(Detectability, HiddenUnstableMode) {
  Matrix C(1, 2);
  C << 1, 0;
  EXPECT_FALSE(detectable_full(2.0 * Matrix::Identity(2, 2), C));
}

TEST(Detectability, Case2IsDetectable) {
  const SystemModel m = fixture("case2_unstable").model;
  EXPECT_TRUE(detectable_full(m.A, m.C()));
}

TEST(Delays, OutcomeProbabilities) {
  const DelayModel d{0.3, 0.6};
  EXPECT_DOUBLE_EQ(outcome_probability(d, kOutcome00), 0.3 * 0.6);
  EXPECT_DOUBLE_EQ(outcome_probability(d, kOutcome01), 0.3 * 0.4);
  EXPECT_DOUBLE_EQ(outcome_probability(d, kOutcome10), 0.7 * 0.6);
  EXPECT_DOUBLE_EQ(outcome_probability(d, kOutcome11), 0.7 * 0.4);
  EXPECT_THROW(DelayModel::make(1.1, 0.0), std::invalid_argument);
  EXPECT_THROW(DelayModel::make(0.0, -0.1), std::invalid_argument);
}

TEST(Delays, LabelsRoundTrip) {
  for (DelayOutcome o : kAllOutcomes) EXPECT_EQ(DelayOutcome::parse(o.label()), o);
  EXPECT_EQ(kOutcome01.label(), "01");
  EXPECT_THROW(DelayOutcome::parse("2"), std::invalid_argument);
}

TEST(Selectors, Shapes) {
  const BlockDims d{2, 3, 1, 2};
  const SelectorSet s = make_selectors(d);
  EXPECT_TRUE((s.Xi4.transpose() * s.Xi3).isZero(0.0));
  EXPECT_EQ(s.Xi1.rows(), 1);
  EXPECT_EQ(s.Xi1.cols(), 3);
  EXPECT_EQ((s.Xi1 * s.Xi1.transpose()), Matrix::Identity(1, 1));
  EXPECT_EQ((s.Xi2 * s.Xi2.transpose()), Matrix::Identity(2, 2));
  EXPECT_EQ((s.Xi3.transpose() * s.Xi3), Matrix::Identity(3, 3));
  EXPECT_EQ((s.Xi1bar * s.Xi4), Matrix::Identity(2, 2));
  EXPECT_EQ((s.Xi4bar * s.Xi3), Matrix::Identity(3, 3));
}
