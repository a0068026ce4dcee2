#include "clot/semicircle.hpp"

#include <cmath>
#include <numbers>

namespace clot {

double semicircle_center(int condition) {
  switch (condition) {
    case 1:
    case 2:
      return -1.0;
    case 3:
    case 4:
      return 1.0;
    default:
      throw validation_error("semicircle: condition must be in {1, 2, 3, 4}");
  }
}

double semicircle_mean_angle(int condition, double t) {
  const double pi = std::numbers::pi;
  switch (condition) {
    case 1:
      return t * pi;
    case 2:
      return -t * pi;
    case 3:
      return (1.0 - t) * pi;
    case 4:
      return (t - 1.0) * pi;
    default:
      throw validation_error("semicircle: condition must be in {1, 2, 3, 4}");
  }
}

VectorXd semicircle_point(int condition, double t, const SemicircleOptions& opts,
                          Rng& rng) {
  const double center = semicircle_center(condition);
  const double mean_angle = semicircle_mean_angle(condition, t);
  const double radius =
      opts.radius_sigma > 0.0 ? rng.lognormal(0.0, opts.radius_sigma) : 1.0;
  const double angle =
      opts.kappa > 0.0 ? rng.von_mises(mean_angle, opts.kappa) : mean_angle;
  VectorXd y(2);
  y << center + radius * std::cos(angle), radius * std::sin(angle);
  return y;
}

ObservationSet generate_semicircle(const SemicircleOptions& opts, Rng& rng) {
  CLOT_VALIDATE(opts.times.size() >= 1, "semicircle: need at least one time");
  CLOT_VALIDATE(opts.per_group > 0, "semicircle: per_group must be positive");
  CLOT_VALIDATE(!opts.conditions.empty(), "semicircle: need at least one condition");
  ObservationSet data;
  for (double t : opts.times) {
    CLOT_VALIDATE(t >= 0.0 && t <= 1.0, "semicircle: times must lie in [0, 1]");
    for (int c : opts.conditions) {
      for (int i = 0; i < opts.per_group; ++i) {
        data.add(semicircle_point(c, t, opts, rng), Condition::discrete(c), t, i);
      }
    }
  }
  data.finalize();
  return data;
}

}  // namespace clot
