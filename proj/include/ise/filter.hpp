#pragma once

// Plant simulation and the two-estimator realization of the delayed filter.

#include "ise/csv.hpp"
#include "ise/gains.hpp"
#include "ise/model.hpp"
#include "ise/rng.hpp"

#include <ostream>
#include <vector>

namespace ise {

struct EstimatorState {
  Vector xhat1;    // subsystem-1 estimate (prior after predict, posterior after update)
  Vector xhat2;
  Matrix P_prior;  // P_{t|t-1}
  Matrix P_post;   // P_{t|t}
  Matrix gain;     // gain applied by the last update; empty before the first one
  std::size_t t = 0;

  Vector stacked() const {
    Vector x(xhat1.size() + xhat2.size());
    x << xhat1, xhat2;
    return x;
  }
};

// t = 0: zero estimate, P_{0|0} = Sigma0.
inline EstimatorState initial_state(const SystemModel& model) {
  EstimatorState s;
  s.xhat1 = Vector::Zero(model.n1);
  s.xhat2 = Vector::Zero(model.n2);
  s.P_post = model.Sigma0;
  s.P_prior = model.Sigma0;
  return s;
}

// P_1 = A Sigma0 A^T + W
inline Matrix first_prior(const SystemModel& model) {
  return symmetrize(model.A * model.Sigma0 * model.A.transpose() + model.W);
}

inline EstimatorState predict(const EstimatorState& s, const SystemModel& model) {
  EstimatorState out = s;
  out.xhat1 = model.A_block(1, 1) * s.xhat1 + model.A_block(1, 2) * s.xhat2;
  out.xhat2 = model.A_block(2, 1) * s.xhat1 + model.A_block(2, 2) * s.xhat2;
  out.P_prior = symmetrize(model.A * s.P_post * model.A.transpose() + model.W);
  out.t = s.t + 1;
  return out;
}

// Per-subsystem measurement update. Each estimator uses its own innovation
// and, only when the cross measurement arrived on time, the other one.
inline EstimatorState update(const EstimatorState& s, const SystemModel& model, const Vector& y1, const Vector& y2,
                             DelayOutcome outcome) {
  if (y1.size() != model.m1 || y2.size() != model.m2 || s.xhat1.size() != model.n1 || s.xhat2.size() != model.n2)
    throw std::invalid_argument("update: dimension mismatch");
  const Index n1 = model.n1, n2 = model.n2, m1 = model.m1, m2 = model.m2;
  const Matrix C = model.C();
  EstimatorState out = s;
  out.gain = optimal_gains(s.P_prior, C, model.V, model.dims())[outcome];
  const Matrix& D = out.gain;

  const Vector innov1 = y1 - model.C1 * s.xhat1;
  const Vector innov2 = y2 - model.C2 * s.xhat2;

  out.xhat1 = s.xhat1 + D.topLeftCorner(n1, m1) * innov1;
  if (outcome.gamma1) out.xhat1 += D.topRightCorner(n1, m2) * innov2;

  out.xhat2 = s.xhat2 + D.bottomRightCorner(n2, m2) * innov2;
  if (outcome.gamma2) out.xhat2 += D.bottomLeftCorner(n2, m1) * innov1;

  out.P_post = posterior_cov(s.P_prior, D, C, model.V);
  return out;
}

// Stacked form x + Delta (y - C x), for cross-checking the per-subsystem update.
inline Vector update_stacked(const EstimatorState& s, const SystemModel& model, const Vector& y1, const Vector& y2,
                             DelayOutcome outcome) {
  const Matrix C = model.C();
  const Matrix D = optimal_gains(s.P_prior, C, model.V, model.dims())[outcome];
  Vector y(model.m());
  y << y1, y2;
  const Vector x = s.stacked();
  return x + D * (y - C * x);
}

struct PlantTrajectory {
  std::vector<Vector> x;   // x_0 .. x_T
  std::vector<Vector> y1;  // y^1_0 .. y^1_T
  std::vector<Vector> y2;
};

inline PlantTrajectory simulate_plant(const SystemModel& model, std::size_t steps, SeededRng& rng) {
  const GaussianSampler x0(model.Sigma0), w(model.W), v(model.V);
  const Matrix C1 = model.C1, C2 = model.C2;
  PlantTrajectory tr;
  tr.x.reserve(steps + 1);
  tr.y1.reserve(steps + 1);
  tr.y2.reserve(steps + 1);
  Vector x = x0.sample(rng);
  for (std::size_t t = 0; t <= steps; ++t) {
    if (t > 0) x = model.A * x + w.sample(rng);
    const Vector noise = v.sample(rng);
    tr.x.push_back(x);
    tr.y1.push_back(C1 * x.head(model.n1) + noise.head(model.m1));
    tr.y2.push_back(C2 * x.tail(model.n2) + noise.tail(model.m2));
  }
  return tr;
}

// Delay indicators for one step: gamma^i = 0 (delayed) when u_i < lambda_i.
// Sharing the uniforms across different lambdas couples runs monotonically.
inline DelayOutcome draw_outcome(const DelayModel& delays, SeededRng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return {!(u1 < delays.lambda1), !(u2 < delays.lambda2)};
}

struct StepRecord {
  std::size_t t = 0;
  DelayOutcome gamma;
  Vector x;
  Vector y1;
  Vector y2;
  Vector xhat_prior;
  Vector xhat_post;
  Matrix P_prior;
  Matrix P_post;
  Matrix gain;
  double sq_err = 0.0;        // |x_t - xhat_{t|t}|^2
  double sq_err_prior = 0.0;  // |x_t - xhat_{t|t-1}|^2
};

struct TrajectoryRecord {
  std::vector<StepRecord> steps;
};

inline TrajectoryRecord run_filter(const SystemModel& model, const DelayModel& delays, std::size_t steps,
                                   SeededRng& rng) {
  const PlantTrajectory plant = simulate_plant(model, steps, rng);
  TrajectoryRecord rec;
  rec.steps.reserve(steps);
  EstimatorState s = initial_state(model);
  for (std::size_t t = 1; t <= steps; ++t) {
    const DelayOutcome gamma = draw_outcome(delays, rng);
    s = predict(s, model);
    StepRecord r;
    r.t = t;
    r.gamma = gamma;
    r.x = plant.x[t];
    r.y1 = plant.y1[t];
    r.y2 = plant.y2[t];
    r.xhat_prior = s.stacked();
    r.P_prior = s.P_prior;
    s = update(s, model, plant.y1[t], plant.y2[t], gamma);
    r.xhat_post = s.stacked();
    r.P_post = s.P_post;
    r.gain = s.gain;
    r.sq_err = (r.x - r.xhat_post).squaredNorm();
    r.sq_err_prior = (r.x - r.xhat_prior).squaredNorm();
    rec.steps.push_back(std::move(r));
  }
  return rec;
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  const Index n = rec.steps.empty() ? 0 : rec.steps.front().x.size();
  os << "t,gamma1,gamma2";
  for (Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Index i = 1; i <= n; ++i) os << ",xhat_" << i;
  os << ",trace_P_prior,trace_P_post,sq_err\n";
  for (const StepRecord& r : rec.steps) {
    os << r.t << ',' << int(r.gamma.gamma1) << ',' << int(r.gamma.gamma2);
    for (Index i = 0; i < n; ++i) os << ',' << format_double(r.x(i));
    for (Index i = 0; i < n; ++i) os << ',' << format_double(r.xhat_post(i));
    os << ',' << format_double(r.P_prior.trace()) << ',' << format_double(r.P_post.trace()) << ','
       << format_double(r.sq_err) << '\n';
  }
}

}  // namespace ise
