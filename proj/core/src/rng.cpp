#include "clot/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace clot {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  CLOT_REQUIRE(n > 0, "uniform_index: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = engine_();
  while (r >= limit) {
    r = engine_();
  }
  return r % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return normal_spare_;
  }
  // Box-Muller on (0,1] x [0,1) to keep log() finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  normal_spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::von_mises(double mean, double kappa) {
  CLOT_REQUIRE(kappa >= 0.0, "von_mises: kappa must be >= 0");
  const double pi = std::numbers::pi;
  if (kappa == 0.0) {
    return mean + uniform(-pi, pi);
  }
  // Best & Fisher (1979) rejection from a wrapped Cauchy envelope.
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double theta = 0.0;
  while (true) {
    double u1 = uniform01();
    double z = std::cos(pi * u1);
    double f = (1.0 + r * z) / (r + z);
    double c = kappa * (r - f);
    double u2 = uniform01();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      double u3 = uniform01();
      theta = (u3 < 0.5 ? -1.0 : 1.0) * std::acos(f);
      break;
    }
  }
  double angle = mean + theta;
  // Wrap into (-pi, pi] around zero offset; callers treat angles modulo 2*pi.
  while (angle > pi) angle -= 2.0 * pi;
  while (angle <= -pi) angle += 2.0 * pi;
  return angle;
}

std::vector<int> Rng::permutation(int n) {
  CLOT_REQUIRE(n >= 0, "permutation: n must be >= 0");
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    auto j = static_cast<int>(uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

Rng Rng::child(std::uint64_t tag) {
  // splitmix64 finalizer over (parent draw, tag) decorrelates child streams.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return Rng(mix(engine_() ^ mix(tag)));
}

}  // namespace clot
