#pragma once

#include <functional>
#include <optional>

#include "clot/common.hpp"
#include "clot/rng.hpp"

namespace clot {

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index worst_coordinate = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  Index coordinates_checked = 0;
};

/// Compares an analytic gradient against central finite differences of a
/// scalar function.  Relative error per coordinate is
/// |a - fd| / max(1, |a|, |fd|).  When `probe_count` is positive and smaller
/// than the dimension, a random subset of coordinates is checked (rng
/// required); otherwise every coordinate is.
GradCheckReport check_gradient(const std::function<double(const VectorXd&)>& fn,
                               const VectorXd& at, const VectorXd& analytic,
                               double step = 1e-5, int probe_count = -1,
                               Rng* rng = nullptr);

}  // namespace clot
