#include "ise/gains.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ise;

namespace {

const BlockDims k1111{1, 1, 1, 1};

Matrix P_corr() {
  Matrix P(2, 2);
  P << 1, 0.5, 0.5, 1;
  return P;
}

Matrix I2() { return Matrix::Identity(2, 2); }

}  // namespace

TEST(Psi, DecoupledIdentity) {
  const PsiSet psi = compute_psi(I2(), I2(), I2(), k1111);
  EXPECT_DOUBLE_EQ(psi.psi1(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(psi.psi3(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(psi.psi4(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(psi.psi6(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(psi.psi2(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(psi.psi2(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(psi.psi5(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(psi.psi5(1, 0), 1.0);
}

TEST(Psi, CorrelatedPrior) {
  const PsiSet psi = compute_psi(P_corr(), I2(), I2(), k1111);
  EXPECT_NEAR(psi.psi1(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi3(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi4(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi6(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi2(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(psi.psi2(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi5(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi5(1, 0), 1.0, 1e-15);
}

TEST(Psi, ZeroPrior) {
  Matrix V(2, 2);
  V << 2, 0.3, 0.3, 4;
  const PsiSet psi = compute_psi(Matrix::Zero(2, 2), I2(), V, k1111);
  EXPECT_TRUE(psi.psi2.isZero(0.0));
  EXPECT_TRUE(psi.psi5.isZero(0.0));
  EXPECT_NEAR(psi.psi3(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(psi.psi6(0, 0), 0.25, 1e-15);
}

TEST(Psi, RejectsIndefinitePrior) {
  Matrix P(2, 2);
  P << 1, 0, 0, -1;
  EXPECT_THROW(compute_psi(P, I2(), I2(), k1111), std::invalid_argument);
}

TEST(Psi, InvariantsOnRandomInput) {
  std::mt19937_64 g(7);
  const BlockDims d{2, 3, 2, 1};
  const Matrix P = oracle::random_psd(g, 5);
  const Matrix C = oracle::random_matrix(g, 3, 5);
  const Matrix V = oracle::random_pd(g, 3);
  const PsiSet psi = compute_psi(P, C, V, d);
  EXPECT_LT(max_abs(psi.psi1 - psi.psi4.transpose()), 1e-12);
  EXPECT_TRUE(is_positive_definite(psi.psi3));
  EXPECT_TRUE(is_positive_definite(psi.psi6));
}

TEST(Gains, DecoupledAllEqualHalfIdentity) {
  const GainSet g = optimal_gains(I2(), I2(), I2(), k1111);
  for (DelayOutcome o : kAllOutcomes) EXPECT_LT(max_abs(g[o] - 0.5 * I2()), 1e-15) << o.label();
}

TEST(Gains, CorrelatedOutcome01) {
  const Matrix D = optimal_gain(P_corr(), I2(), I2(), k1111, kOutcome01);
  EXPECT_NEAR(D(0, 0), 0.5, 1e-12);
  EXPECT_EQ(D(0, 1), 0.0);
  EXPECT_NEAR(D(1, 0), 2.0 / 15.0, 1e-12);
  EXPECT_NEAR(D(1, 1), 7.0 / 15.0, 1e-12);
}

TEST(Gains, CorrelatedOutcome11IsKalman) {
  const Matrix D = optimal_gain(P_corr(), I2(), I2(), k1111, kOutcome11);
  const Matrix ref = P_corr() * (I2() + P_corr()).inverse();
  EXPECT_LT(max_abs(D - ref), 1e-14);
  EXPECT_NEAR(D(0, 0), 7.0 / 15.0, 1e-12);
  EXPECT_NEAR(D(0, 1), 2.0 / 15.0, 1e-12);
}

TEST(Gains, MasksAreExactZeros) {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockDims d{2, 2, 1, 2};
    const GainSet gs = optimal_gains(oracle::random_psd(g, 4), oracle::random_matrix(g, 3, 4),
                                     oracle::random_pd(g, 3), d);
    EXPECT_TRUE(satisfies_mask(gs.d00, StructuredMask::BlockDiag, d));
    EXPECT_TRUE(satisfies_mask(gs.d01, StructuredMask::LowerBlock, d));
    EXPECT_TRUE(satisfies_mask(gs.d10, StructuredMask::UpperBlock, d));
  }
}

TEST(Oracle, FullIdentityIsHalf) {
  EXPECT_LT(max_abs(oracle_structured_gain(I2(), I2(), I2(), k1111, StructuredMask::Full) - 0.5 * I2()), 1e-15);
}

TEST(Oracle, BlockDiagIgnoresCorrelation) {
  const Matrix D = oracle_structured_gain(P_corr(), I2(), I2(), k1111, StructuredMask::BlockDiag);
  EXPECT_NEAR(D(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(D(1, 1), 0.5, 1e-15);
  EXPECT_EQ(D(0, 1), 0.0);
  EXPECT_EQ(D(1, 0), 0.0);
}

TEST(Oracle, FullIsKalmanOnRandomInput) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockDims d{2, 1, 1, 2};
    const Matrix P = oracle::random_psd(g, 3), C = oracle::random_matrix(g, 3, 3), V = oracle::random_pd(g, 3);
    EXPECT_LT(max_abs(oracle_structured_gain(P, C, V, d, StructuredMask::Full) - oracle::kalman_gain(P, C, V)),
              1e-9);
  }
}

// Two independent routes to the structured optimum, checked against the closed form.
TEST(Gains, AgreeWithBothOracles) {
  std::mt19937_64 g(2024);
  std::uniform_int_distribution<int> nd(1, 3), md(1, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const BlockDims d{nd(g), nd(g), md(g), md(g)};
    const Matrix P = oracle::random_psd(g, d.n(), trial % 3 == 0 ? 1 : d.n());
    const Matrix C = oracle::random_matrix(g, d.m(), d.n());
    const Matrix V = oracle::random_pd(g, d.m());
    const GainSet gs = optimal_gains(P, C, V, d);
    for (DelayOutcome o : kAllOutcomes) {
      const StructuredMask mask = mask_for(o);
      const Matrix a = oracle_structured_gain(P, C, V, d, mask);
      EXPECT_LT(max_abs(gs[o] - a), 1e-8) << "trial " << trial << " outcome " << o.label();
      if (trial < 40) {
        const Matrix b = oracle::coordinate_descent_gain(P, C, V, mask_pattern(mask, d));
        EXPECT_LT(max_abs(gs[o] - b), 1e-7) << "trial " << trial << " outcome " << o.label();
      }
    }
  }
}

TEST(Gains, TraceOrderingUnderMaskNesting) {
  std::mt19937_64 g(99);
  for (int trial = 0; trial < 100; ++trial) {
    const BlockDims d{2, 2, 2, 1};
    const Matrix P = oracle::random_psd(g, 4), C = oracle::random_matrix(g, 3, 4), V = oracle::random_pd(g, 3);
    const GainSet gs = optimal_gains(P, C, V, d);
    auto tr = [&](const Matrix& D) { return posterior_cov(P, D, C, V).trace(); };
    EXPECT_LE(tr(gs.d11), tr(gs.d01) + 1e-10);
    EXPECT_LE(tr(gs.d01), tr(gs.d00) + 1e-10);
    EXPECT_LE(tr(gs.d11), tr(gs.d10) + 1e-10);
    EXPECT_LE(tr(gs.d10), tr(gs.d00) + 1e-10);
  }
}

TEST(Gains, DimensionMismatchThrows) {
  EXPECT_THROW(optimal_gains(Matrix::Identity(3, 3), I2(), I2(), k1111), std::invalid_argument);
}

TEST(Posterior, ZeroGainLeavesPrior) {
  const Matrix P = P_corr();
  EXPECT_EQ(posterior_cov(P, Matrix::Zero(2, 2), I2(), I2()), P);
}

TEST(Posterior, HalfGainIdentity) {
  EXPECT_LT(max_abs(posterior_cov(I2(), 0.5 * I2(), I2(), I2()) - 0.5 * I2()), 1e-15);
}

TEST(Posterior, SymmetricPsdForAnyGain) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix P = oracle::random_psd(g, 4), C = oracle::random_matrix(g, 3, 4), V = oracle::random_pd(g, 3);
    const Matrix D = oracle::random_matrix(g, 4, 3, 3.0);
    const Matrix Q = posterior_cov(P, D, C, V);
    EXPECT_EQ(Q, Q.transpose());
    EXPECT_GE(oracle::min_eig(Q), -1e-12 * Q.trace());
  }
}

TEST(KalmanFactorization, Identity) { EXPECT_LT(kalman_factorization_check(I2(), I2(), I2(), k1111), 1e-15); }

TEST(KalmanFactorization, RandomInstance) {
  std::mt19937_64 g(17);
  const BlockDims d{2, 2, 2, 1};
  for (int trial = 0; trial < 20; ++trial)
    EXPECT_LT(kalman_factorization_check(oracle::random_psd(g, 4), oracle::random_matrix(g, 3, 4),
                                         oracle::random_pd(g, 3), d),
              1e-10);
}

TEST(KalmanFactorization, ZeroPrior) {
  EXPECT_EQ(kalman_factorization_check(Matrix::Zero(2, 2), I2(), I2(), k1111), 0.0);
}

TEST(Masks, Nesting) {
  const BlockDims d{2, 1, 1, 2};
  const MaskPattern full = mask_pattern(StructuredMask::Full, d), bd = mask_pattern(StructuredMask::BlockDiag, d),
                    lo = mask_pattern(StructuredMask::LowerBlock, d), up = mask_pattern(StructuredMask::UpperBlock, d);
  EXPECT_TRUE((bd <= lo).all());
  EXPECT_TRUE((lo <= full).all());
  EXPECT_TRUE((bd <= up).all());
  EXPECT_TRUE((up <= full).all());
  EXPECT_FALSE(lo(0, 2));
  EXPECT_TRUE(lo(2, 0));
  EXPECT_FALSE(up(2, 0));
  EXPECT_TRUE(up(0, 2));
}
