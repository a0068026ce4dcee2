#pragma once

#include "clot/condition.hpp"
#include "clot/density.hpp"
#include "clot/metric.hpp"
#include "clot/optim.hpp"
#include "clot/spline.hpp"

namespace clot {

/// Path energy functional: integral over s in [0, 1] of
///   1/2 qdot^T G(q | x) qdot - U(q | x),
/// with G from an optional learned metric field (identity otherwise) and U an
/// optional data-density potential (zero otherwise).
struct Lagrangian {
  const MetricField* metric = nullptr;
  const Potential* potential = nullptr;
};

/// Precomputed per-batch condition context for geometry evaluation: encoded
/// condition columns, the metric net's FiLM state, and the potential's
/// per-condition kernel groups.  Built once per batch (conditions and
/// parameters frozen), then shared across many path evaluations.
struct GeometryBatch {
  Index count = 0;
  MatrixXd encoded;  // enc_dim x count; empty when nothing needs encoding
  bool has_metric_film = false;
  FilmState metric_film;
  struct PotentialGroup {
    std::vector<int> cols;  // sample indices within the batch
    ResolvedKernel kernel;
  };
  std::vector<PotentialGroup> groups;

  /// Restrict to a subset of samples (new batch indices = positions in idx).
  GeometryBatch select(const std::vector<int>& idx) const;
};

GeometryBatch make_geometry_batch(const Lagrangian& lag,
                                  const std::vector<Condition>& conds,
                                  const ConditionEncoder* encoder);

/// Single-condition convenience wrapper (count = 1).
GeometryBatch make_geometry_batch(const Lagrangian& lag, const Condition& cond,
                                  const ConditionEncoder* encoder);

/// Midpoint-quadrature evaluation of the action for batches of spline paths,
/// with exact reverse-mode derivatives with respect to endpoints, interior
/// offsets, and (optionally) metric parameters.  Paths are linear in their
/// control points, so positions and velocities at all quadrature nodes are
/// two matrix products per coordinate.
class ActionEvaluator {
 public:
  ActionEvaluator(const Lagrangian& lag, const NaturalSplineBasis& basis,
                  int quad_points);

  const Lagrangian& lagrangian() const { return lag_; }
  const NaturalSplineBasis& basis() const { return basis_; }
  int quad_points() const { return quad_; }

  struct Request {
    bool endpoint_grads = false;
    bool offset_grads = false;
    /// Accumulates param_scale * sum_i d action_i / d theta_G (film embedder
    /// included) into this vector when non-null.
    ParamVector* metric_param_grad = nullptr;
    double param_scale = 1.0;
  };

  struct Result {
    VectorXd action;    // per sample
    MatrixXd d_y0;      // dim x n when endpoint_grads
    MatrixXd d_y1;      // dim x n when endpoint_grads
    MatrixXd d_offsets; // (dim * knots) x n when offset_grads, column-major per path
  };

  /// y0, y1: dim x n; offsets: (dim * knots) x n (column-major reshape of each
  /// path's dim x knots block).
  Result evaluate(const MatrixXd& y0, const MatrixXd& y1, const MatrixXd& offsets,
                  const GeometryBatch& conds, const Request& req) const;

  double value1(const SplinePath& path, const GeometryBatch& cond) const;

 private:
  Lagrangian lag_;
  const NaturalSplineBasis& basis_;
  int quad_;
  MatrixXd wv_, wd_;       // quad x control
  VectorXd lerp_s_;        // control-point positions on [0, 1]
};

/// Least-action curve between fixed endpoints: minimizes the action over the
/// interior offsets starting from `offsets_init` (empty = straight line).
struct GeodesicResult {
  SplinePath path;
  double action = 0.0;
  int iters = 0;
  bool converged = false;
};

GeodesicResult lagrangian_cost(const ActionEvaluator& eval, const VectorXd& y0,
                               const VectorXd& y1, const GeometryBatch& cond,
                               const MatrixXd& offsets_init,
                               const LbfgsOptions& solver);

}  // namespace clot
