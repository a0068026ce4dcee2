#pragma once

#include "clot/condition.hpp"
#include "clot/rng.hpp"

namespace clot {

/// Mean negative log density of `truth` columns under an isotropic Gaussian
/// kernel density fitted to `generated` columns.
double eval_nll(const MatrixXd& generated, const MatrixXd& truth, double bandwidth);

/// Mean absolute radial deviation of 2-D samples from the unit circle
/// centered at (center_x, 0).
double circle_distance(const MatrixXd& samples, double center_x, double radius);

/// circle_distance against the semicircle family's circle for condition
/// id 1..4 (center -1 for ids 1-2, +1 for ids 3-4, radius 1).
double eval_cd(const MatrixXd& samples, int condition_id);

/// Exact 2-Wasserstein distance between equal-size empirical distributions:
/// optimal assignment on squared Euclidean costs, then sqrt of the mean
/// matched cost.
double eval_w2(const MatrixXd& a, const MatrixXd& b);

/// Two-sample energy distance 2 E|A-B| - E|A-A'| - E|B-B'| (all-pairs means).
double energy_distance(const MatrixXd& a, const MatrixXd& b);

struct EnergyTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int permutations = 0;

  bool distinguishable(double significance) const { return p_value < significance; }
};

/// Permutation test of "A and B share a distribution" using the energy
/// distance: pools the columns, reshuffles the split `permutations` times,
/// and reports p = (1 + #{E_perm >= E_obs}) / (permutations + 1).
EnergyTestResult energy_distance_test(const MatrixXd& a, const MatrixXd& b,
                                      int permutations, Rng& rng);

}  // namespace clot
