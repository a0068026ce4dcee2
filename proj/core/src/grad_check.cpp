#include "clot/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace clot {

GradCheckReport check_gradient(const std::function<double(const VectorXd&)>& fn,
                               const VectorXd& at, const VectorXd& analytic,
                               double step, int probe_count, Rng* rng) {
  CLOT_REQUIRE(analytic.size() == at.size(), "check_gradient: size mismatch");
  CLOT_REQUIRE(step > 0.0, "check_gradient: step must be positive");

  std::vector<Index> coords;
  const Index n = at.size();
  if (probe_count > 0 && probe_count < n) {
    CLOT_REQUIRE(rng != nullptr, "check_gradient: rng required for subsampling");
    // Sample distinct coordinates via a partial shuffle.
    std::vector<int> perm = rng->permutation(static_cast<int>(n));
    coords.assign(perm.begin(), perm.begin() + probe_count);
  } else {
    coords.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
  }

  GradCheckReport report;
  report.coordinates_checked = static_cast<Index>(coords.size());
  VectorXd x = at;
  for (Index i : coords) {
    const double saved = x(i);
    x(i) = saved + step;
    const double f_plus = fn(x);
    x(i) = saved - step;
    const double f_minus = fn(x);
    x(i) = saved;
    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double a = analytic(i);
    const double denom = std::max({1.0, std::abs(a), std::abs(fd)});
    const double rel = std::abs(a - fd) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
      report.analytic_at_worst = a;
      report.numeric_at_worst = fd;
    }
  }
  return report;
}

}  // namespace clot
