#pragma once

// Monte-Carlo estimates of the expected error covariance, lambda sweeps and
// the full-gain baseline.

#include "ise/csv.hpp"
#include "ise/filter.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

namespace ise {

// ISE_WORKERS overrides; otherwise one per hardware thread.
inline unsigned worker_count() {
  if (const char* env = std::getenv("ISE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs fn(i) for i in [0, count). Each i must write only its own slot.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct EecResult {
  DelayModel delays;
  std::size_t runs = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  // index k is time t = k + 1
  std::vector<Matrix> mean_P;           // mean of P_{t|t-1}
  std::vector<double> trace_mean;       // trace of mean_P
  std::vector<double> trace_stderr;     // standard error of the per-run traces
  std::vector<Matrix> mean_P_post;      // mean of P_{t|t}
  std::vector<double> sq_err_mean;      // mean |x_t - xhat_{t|t-1}|^2
  std::vector<double> sq_err_stderr;
};

namespace detail {

struct RunSummary {
  std::vector<Matrix> P_prior;
  std::vector<Matrix> P_post;
  std::vector<double> sq_err_prior;
};

inline RunSummary summarize_run(const SystemModel& model, const DelayModel& delays, std::size_t horizon,
                                std::uint64_t seed, std::uint64_t run) {
  SeededRng rng(seed, run);
  const TrajectoryRecord rec = run_filter(model, delays, horizon, rng);
  RunSummary s;
  s.P_prior.reserve(horizon);
  s.P_post.reserve(horizon);
  s.sq_err_prior.reserve(horizon);
  for (const StepRecord& r : rec.steps) {
    s.P_prior.push_back(r.P_prior);
    s.P_post.push_back(r.P_post);
    s.sq_err_prior.push_back(r.sq_err_prior);
  }
  return s;
}

// Sums in ascending run order, then divides.
inline EecResult reduce_runs(const std::vector<RunSummary>& runs, const DelayModel& delays, std::size_t horizon,
                             std::uint64_t seed, Index n) {
  EecResult out;
  out.delays = delays;
  out.runs = runs.size();
  out.horizon = horizon;
  out.seed = seed;
  const double R = static_cast<double>(runs.size());
  for (std::size_t k = 0; k < horizon; ++k) {
    Matrix sumP = Matrix::Zero(n, n), sumPost = Matrix::Zero(n, n);
    double s_e = 0.0;
    for (const RunSummary& r : runs) {
      sumP += r.P_prior[k];
      sumPost += r.P_post[k];
      s_e += r.sq_err_prior[k];
    }
    out.mean_P.push_back(sumP / R);
    out.mean_P_post.push_back(sumPost / R);
    out.trace_mean.push_back(out.mean_P.back().trace());
    out.sq_err_mean.push_back(s_e / R);
    // two passes; the one-pass formula cancels badly when runs agree
    double d_tr = 0.0, d_e = 0.0;
    for (const RunSummary& r : runs) {
      const double a = r.P_prior[k].trace() - out.trace_mean.back();
      const double b = r.sq_err_prior[k] - out.sq_err_mean.back();
      d_tr += a * a;
      d_e += b * b;
    }
    out.trace_stderr.push_back(R < 2 ? 0.0 : std::sqrt(d_tr / (R - 1) / R));
    out.sq_err_stderr.push_back(R < 2 ? 0.0 : std::sqrt(d_e / (R - 1) / R));
  }
  return out;
}

}  // namespace detail

inline EecResult estimate_eec(const SystemModel& model, const DelayModel& delays, std::size_t runs,
                              std::size_t horizon, std::uint64_t master_seed, unsigned workers = worker_count()) {
  if (runs < 1) throw std::invalid_argument("estimate_eec: runs must be at least 1");
  if (horizon < 1) throw std::invalid_argument("estimate_eec: horizon must be at least 1");
  std::vector<detail::RunSummary> per_run(runs);
  parallel_for(runs, workers,
               [&](std::size_t r) { per_run[r] = detail::summarize_run(model, delays, horizon, master_seed, r); });
  return detail::reduce_runs(per_run, delays, horizon, master_seed, model.n());
}

// Full-gain Riccati recursion: traces of P_{t|t-1} for t = 1..horizon.
inline std::vector<double> kalman_baseline(const SystemModel& model, std::size_t horizon) {
  const Matrix C = model.C();
  std::vector<double> out;
  out.reserve(horizon);
  Matrix P = first_prior(model);
  for (std::size_t t = 1; t <= horizon; ++t) {
    out.push_back(P.trace());
    const Matrix K = optimal_gains(P, C, model.V, model.dims()).d11;
    P = symmetrize(model.A * posterior_cov(P, K, C, model.V) * model.A.transpose() + model.W);
  }
  return out;
}

// Iterates until the relative trace change drops below tol.
inline double kalman_steady_trace(const SystemModel& model, std::size_t max_steps = 10000, double tol = 1e-12) {
  const Matrix C = model.C();
  Matrix P = first_prior(model);
  double prev = P.trace();
  for (std::size_t t = 0; t < max_steps; ++t) {
    const Matrix K = optimal_gains(P, C, model.V, model.dims()).d11;
    P = symmetrize(model.A * posterior_cov(P, K, C, model.V) * model.A.transpose() + model.W);
    const double tr = P.trace();
    if (std::abs(tr - prev) <= tol * tr) return tr;
    prev = tr;
  }
  return prev;
}

struct SweepResult {
  std::size_t runs = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::vector<EecResult> cells;
  std::vector<double> kalman;  // baseline trace series
};

// Every cell reuses the same run streams, so cells share their noise and
// delay uniforms (common random numbers).
inline SweepResult sweep(const SystemModel& model, const std::vector<DelayModel>& grid, std::size_t runs,
                         std::size_t horizon, std::uint64_t master_seed, unsigned workers = worker_count()) {
  if (runs < 1 || horizon < 1) throw std::invalid_argument("sweep: runs and horizon must be at least 1");
  for (const DelayModel& d : grid) DelayModel::make(d.lambda1, d.lambda2);
  SweepResult res;
  res.runs = runs;
  res.horizon = horizon;
  res.seed = master_seed;
  std::vector<detail::RunSummary> per_run(grid.size() * runs);
  parallel_for(per_run.size(), workers, [&](std::size_t i) {
    const std::size_t cell = i / runs, r = i % runs;
    per_run[i] = detail::summarize_run(model, grid[cell], horizon, master_seed, r);
  });
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const std::vector<detail::RunSummary> slice(per_run.begin() + static_cast<std::ptrdiff_t>(cell * runs),
                                                per_run.begin() + static_cast<std::ptrdiff_t>((cell + 1) * runs));
    res.cells.push_back(detail::reduce_runs(slice, grid[cell], horizon, master_seed, model.n()));
  }
  res.kalman = kalman_baseline(model, horizon);
  return res;
}

inline std::vector<DelayModel> lambda_grid(const std::vector<double>& l1, const std::vector<double>& l2) {
  std::vector<DelayModel> g;
  for (double a : l1)
    for (double b : l2) g.push_back(DelayModel::make(a, b));
  return g;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
  os << "lambda1,lambda2,t,trace_mean,stderr,trace_kalman\n";
  for (const EecResult& c : res.cells)
    for (std::size_t k = 0; k < c.horizon; ++k)
      os << format_double(c.delays.lambda1) << ',' << format_double(c.delays.lambda2) << ',' << (k + 1) << ','
         << format_double(c.trace_mean[k]) << ',' << format_double(c.trace_stderr[k]) << ','
         << format_double(res.kalman[k]) << '\n';
}

}  // namespace ise
