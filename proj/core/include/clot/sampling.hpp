#pragma once

#include <memory>

#include "clot/observation_set.hpp"
#include "clot/rng.hpp"
#include "clot/transport.hpp"

namespace clot {

/// Trained surrogate for the conditional distribution path: the transport
/// bundle plus the anchor observations it was fitted on.  Sampling at (t*, x)
/// picks the interval containing t*, draws a start point from the anchor
/// samples at its left edge, pushes it through the transport map, generates
/// the connecting path, and reads the path off at the interpolation fraction.
/// No optimization runs at inference time.
class SurrogateModel {
 public:
  SurrogateModel(std::unique_ptr<TransportBundle> bundle,
                 std::shared_ptr<const ObservationSet> anchors);

  const TransportBundle& bundle() const { return *bundle_; }
  const ObservationSet& anchors() const { return *anchors_; }
  std::shared_ptr<const ObservationSet> anchors_ptr() const { return anchors_; }

  /// Interval index k and fraction s for a normalized query time; throws for
  /// t outside the anchor span.
  std::pair<int, double> locate(double t) const;

  VectorXd sample(double t, const Condition& x, Rng& rng) const;
  MatrixXd sample_many(double t, const Condition& x, int count, Rng& rng) const;

  /// Query by raw progression value through the data's time map.
  MatrixXd sample_many_raw(double lambda, const Condition& x, int count,
                           Rng& rng) const;

 private:
  std::unique_ptr<TransportBundle> bundle_;
  std::shared_ptr<const ObservationSet> anchors_;
};

}  // namespace clot
