#pragma once

#include "clot/observation_set.hpp"
#include "clot/rng.hpp"

namespace clot {

/// Synthetic benchmark process: four conditions trace semicircular arcs in the
/// plane as time advances.  Conditions 1 and 2 orbit an offset of -1 on the
/// first axis (counter-clockwise and clockwise); conditions 3 and 4 orbit +1,
/// starting from the opposite end of the arc.  Radii are log-normal around 1
/// and angles are von Mises around the arc position.
struct SemicircleOptions {
  std::vector<double> times = {0.0, 0.5, 1.0};
  int per_group = 100;        // samples per (time, condition) cell
  double radius_sigma = 0.05; // log-normal sigma; 0 = noise-free radius 1
  double kappa = 5.0;         // angle concentration; <= 0 = noise-free angle
  std::vector<int> conditions = {1, 2, 3, 4};
};

/// Center offset on the first axis for a condition id.
double semicircle_center(int condition);

/// Mean arc angle at time t for a condition id.
double semicircle_mean_angle(int condition, double t);

/// One draw from the process.
VectorXd semicircle_point(int condition, double t, const SemicircleOptions& opts,
                          Rng& rng);

/// Full dataset: iterates times (outer), conditions, then draws, so a fixed
/// seed yields a byte-stable record order.  Pair keys number draws within
/// each (time, condition) cell.
ObservationSet generate_semicircle(const SemicircleOptions& opts, Rng& rng);

}  // namespace clot
