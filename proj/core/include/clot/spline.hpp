#pragma once

#include "clot/common.hpp"

namespace clot {

/// Natural cubic spline through control points on the uniform grid
/// s_j = j / (n - 1), s in [0, 1].  The spline is linear in its control
/// points: second derivatives at the knots are m = T p per coordinate, where T
/// is the dense curvature operator precomputed from the tridiagonal natural
/// boundary system, so evaluation and differentiation reduce to fixed weight
/// vectors against the control points.
class NaturalSplineBasis {
 public:
  explicit NaturalSplineBasis(int interior_knots);

  int interior_knots() const { return n_ - 2; }
  int control_count() const { return n_; }
  double knot_spacing() const { return h_; }

  /// q(s) = value_weights(s) . p  (per coordinate).
  RowVectorXd value_weights(double s) const;
  /// dq/ds = derivative_weights(s) . p  (per coordinate).
  RowVectorXd derivative_weights(double s) const;

  /// m = curvature_operator() * p gives d2q/ds2 at the knots.
  const MatrixXd& curvature_operator() const { return T_; }

  /// Midpoint-rule quadrature tables: row m holds the weights at node
  /// s_m = (m + 1/2) / points.
  MatrixXd quadrature_value_weights(int points) const;
  MatrixXd quadrature_derivative_weights(int points) const;
  static VectorXd quadrature_nodes(int points);

 private:
  void weights_at(double s, RowVectorXd* value, RowVectorXd* deriv) const;

  int n_;
  double h_;
  MatrixXd T_;
};

/// Curve between two endpoints: interior control points are offsets from the
/// straight-line interpolant, so zero offsets give the straight segment and
/// the endpoints are pinned exactly by construction.
struct SplinePath {
  VectorXd y0;
  VectorXd y1;
  MatrixXd offsets;  // dim x interior_knots

  Index dim() const { return y0.size(); }

  /// Full control matrix, dim x control_count.
  MatrixXd control_points() const;
};

/// Position and velocity (d/ds) at parameter s in [0, 1].
struct PathPoint {
  VectorXd q;
  VectorXd qdot;
};

PathPoint spline_eval(const SplinePath& path, const NaturalSplineBasis& basis, double s);

}  // namespace clot
