#pragma once

// Deterministic per-stream random numbers.

#include "ise/linalg.hpp"

#include <cstdint>
#include <random>

namespace ise {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of stream `stream` under `master`.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL));
}

class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), engine_(stream_seed(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;  // libstdc++: Marsaglia polar method
};

// Draws N(0, cov) through a pivoted LDL^T square-root factor, so semidefinite
// (including zero) covariances are accepted.
class GaussianSampler {
 public:
  GaussianSampler() = default;

  explicit GaussianSampler(const Matrix& cov) {
    const Index n = cov.rows();
    if (n == 0) return;
    Eigen::LDLT<Matrix> ldlt(symmetrize(cov));
    const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    const Matrix L = ldlt.matrixL();
    factor_ = ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
  }

  const Matrix& factor() const { return factor_; }

  Vector sample(SeededRng& rng) const { return factor_ * rng.normal_vector(factor_.cols()); }

 private:
  Matrix factor_;
};

}  // namespace ise
