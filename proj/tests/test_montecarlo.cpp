#include "ise/analysis.hpp"
#include "ise/montecarlo.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ise;

namespace {

SystemModel toy() { return fixture("toy_identity").model; }

}  // namespace

TEST(Eec, NoDelaysEqualsKalmanBaseline) {
  const SystemModel m = fixture("case1_stable").model;
  const EecResult e = estimate_eec(m, {0.0, 0.0}, 7, 40, 3, 1);
  const auto base = kalman_baseline(m, 40);
  for (std::size_t k = 0; k < 40; ++k) {
    EXPECT_NEAR(e.trace_mean[k], base[k], 1e-12 * base[k]) << k;
    EXPECT_NEAR(e.trace_stderr[k], 0.0, 1e-9 * base[k]);
  }
}

TEST(Eec, SingleRunIsOneFilterRun) {
  const SystemModel m = toy();
  const EecResult e = estimate_eec(m, {0.4, 0.7}, 1, 25, 99, 1);
  SeededRng rng(99, 0);
  const TrajectoryRecord rec = run_filter(m, {0.4, 0.7}, 25, rng);
  for (std::size_t k = 0; k < 25; ++k) {
    EXPECT_EQ(e.mean_P[k], rec.steps[k].P_prior);
    EXPECT_EQ(e.trace_stderr[k], 0.0);
  }
}

TEST(Eec, MeanBelowYIteration) {
  const SystemModel m = toy();
  const EecResult e = estimate_eec(m, {0.5, 0.5}, 2000, 10, 17);
  const YSequence y = iterate_Y(m, {0.5, 0.5}, 10);
  EXPECT_LE(e.trace_mean[9], y.trace[9] + 5 * e.trace_stderr[9]);
}

TEST(Eec, WorkerCountDoesNotMatter) {
  const SystemModel m = fixture("case2_unstable").model;
  const EecResult a = estimate_eec(m, {0.3, 0.8}, 37, 15, 5, 1);
  const EecResult b = estimate_eec(m, {0.3, 0.8}, 37, 15, 5, 4);
  for (std::size_t k = 0; k < 15; ++k) {
    EXPECT_EQ(a.mean_P[k], b.mean_P[k]);
    EXPECT_EQ(a.trace_stderr[k], b.trace_stderr[k]);
    EXPECT_EQ(a.sq_err_mean[k], b.sq_err_mean[k]);
  }
}

TEST(Eec, RejectsZeroRuns) { EXPECT_THROW(estimate_eec(toy(), {0.5, 0.5}, 0, 10, 1), std::invalid_argument); }

// With A = 0 every prior is W, so the steady trace is trace(W).
TEST(Baseline, ZeroDynamics) {
  SystemModel m = toy();
  m.A.setZero();
  EXPECT_NEAR(kalman_steady_trace(m), m.W.trace(), 1e-15);
}

TEST(Baseline, ConvergesOnDetectableFixtures) {
  for (auto name : {"case1_stable", "case2_unstable", "toy_identity"}) {
    const auto tr = kalman_baseline(fixture(name).model, 500);
    bool settled = false;
    for (std::size_t k = 1; k < tr.size() && !settled; ++k) settled = std::abs(tr[k] - tr[k - 1]) < 1e-8 * tr[k];
    EXPECT_TRUE(settled) << name;
  }
}

TEST(Baseline, MatchesRiccatiOracle) {
  const SystemModel m = fixture("case2_unstable").model;
  const auto tr = kalman_baseline(m, 60);
  const auto ref = oracle::riccati_priors(m, 60);
  for (std::size_t k = 0; k < 60; ++k) EXPECT_NEAR(tr[k], ref[k].trace(), 1e-10 * ref[k].trace());
}

TEST(Sweep, SingleCellIsEstimate) {
  const SystemModel m = toy();
  const SweepResult s = sweep(m, {DelayModel{0.2, 0.9}}, 50, 12, 8, 2);
  const EecResult e = estimate_eec(m, {0.2, 0.9}, 50, 12, 8, 1);
  ASSERT_EQ(s.cells.size(), 1u);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(s.cells[0].trace_mean[k], e.trace_mean[k]);
}

TEST(Sweep, GridOrderAndCsv) {
  const SystemModel m = toy();
  const SweepResult s = sweep(m, lambda_grid({0.0, 1.0}, {0.0, 0.5}), 20, 3, 1);
  ASSERT_EQ(s.cells.size(), 4u);
  EXPECT_EQ(s.cells[1].delays.lambda1, 0.0);
  EXPECT_EQ(s.cells[1].delays.lambda2, 0.5);
  EXPECT_EQ(s.cells[2].delays.lambda1, 1.0);
  std::ostringstream os;
  write_sweep_csv(os, s);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "lambda1,lambda2,t,trace_mean,stderr,trace_kalman");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 12);
}

TEST(Sweep, RejectsBadProbability) {
  EXPECT_THROW(sweep(toy(), {DelayModel{1.5, 0.0}}, 1, 1, 1), std::invalid_argument);
}

TEST(Sweep, MonotoneInLambda2) {
  const SystemModel m = fixture("case1_stable").model;
  const SweepResult s = sweep(m, lambda_grid({0.5}, {0.0, 0.5, 1.0}), 300, 30, 21);
  for (std::size_t c = 1; c < s.cells.size(); ++c) {
    const double se = std::hypot(s.cells[c].trace_stderr[29], s.cells[c - 1].trace_stderr[29]);
    EXPECT_GE(s.cells[c].trace_mean[29], s.cells[c - 1].trace_mean[29] - 5 * se);
  }
}

// Averaging T(D_gamma, P) over the recorded outcomes approaches g(P).
TEST(Sweep, RecordedOutcomesMatchGMap) {
  const SystemModel m = toy();
  const DelayModel dl{0.5, 0.3};
  const std::size_t t = 4, R = 4000;
  Matrix P = Matrix::Zero(2, 2);
  std::vector<double> diffs;
  const Matrix Pfixed = first_prior(m);
  for (std::size_t r = 0; r < R; ++r) {
    SeededRng rng(31, r);
    const TrajectoryRecord rec = run_filter(m, dl, t, rng);
    const StepRecord& s = rec.steps[0];
    const Matrix next = op_T(optimal_gains(m, Pfixed)[s.gamma], Pfixed, m);
    P += next;
    diffs.push_back(next.trace());
  }
  P /= static_cast<double>(R);
  double mean = 0, var = 0;
  for (double v : diffs) mean += v / R;
  for (double v : diffs) var += (v - mean) * (v - mean) / (R - 1);
  EXPECT_LT(std::abs(P.trace() - g_map(Pfixed, m, dl).trace()), 5 * std::sqrt(var / R) + 1e-12);
}
