#pragma once

#include <cstdint>
#include <random>

#include "clot/common.hpp"

namespace clot {

/// Deterministic random source.  All distributions are implemented here
/// (rather than with std:: distribution objects, whose streams differ across
/// standard libraries) so that a given seed yields the same draws on every
/// platform and toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).  Rejection-free modulo bias is negligible for
  /// the n used here (dataset sizes << 2^64), but we reject anyway to keep the
  /// draw exact.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller.  One spare value is cached.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// log X ~ Normal(mu_log, sigma_log).
  double lognormal(double mu_log, double sigma_log) {
    return std::exp(normal(mu_log, sigma_log));
  }

  /// Von Mises on (-pi, pi] + mean, concentration kappa >= 0, via the
  /// Best-Fisher wrapped-Cauchy rejection sampler.  kappa = 0 degenerates to
  /// uniform on the circle.
  double von_mises(double mean, double kappa);

  /// Fisher-Yates shuffle of [0, n) index permutation.
  std::vector<int> permutation(int n);

  /// Split off an independent child stream.  Derivation hashes the parent
  /// draw with a fixed mix so children with adjacent tags do not correlate.
  Rng child(std::uint64_t tag);

 private:
  std::mt19937_64 engine_;
  double normal_spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace clot
