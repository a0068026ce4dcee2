#include "clot/spline.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace clot {

NaturalSplineBasis::NaturalSplineBasis(int interior_knots) {
  CLOT_REQUIRE(interior_knots >= 0, "NaturalSplineBasis: negative knot count");
  n_ = interior_knots + 2;
  CLOT_REQUIRE(n_ >= 2, "NaturalSplineBasis: need at least two control points");
  h_ = 1.0 / static_cast<double>(n_ - 1);

  // Natural boundary: m_0 = m_{n-1} = 0; interior curvatures solve the
  // tridiagonal system (1, 4, 1) m = (6/h^2) * second-difference(p).
  T_ = MatrixXd::Zero(n_, n_);
  const int inner = n_ - 2;
  if (inner > 0) {
    MatrixXd a = MatrixXd::Zero(inner, inner);
    for (int i = 0; i < inner; ++i) {
      a(i, i) = 4.0;
      if (i > 0) a(i, i - 1) = 1.0;
      if (i + 1 < inner) a(i, i + 1) = 1.0;
    }
    MatrixXd d2 = MatrixXd::Zero(inner, n_);
    for (int i = 0; i < inner; ++i) {
      d2(i, i) = 1.0;
      d2(i, i + 1) = -2.0;
      d2(i, i + 2) = 1.0;
    }
    T_.middleRows(1, inner) = a.ldlt().solve((6.0 / (h_ * h_)) * d2);
  }
}

void NaturalSplineBasis::weights_at(double s, RowVectorXd* value,
                                    RowVectorXd* deriv) const {
  CLOT_REQUIRE(s >= 0.0 && s <= 1.0, "spline parameter outside [0, 1]");
  int j = std::min(static_cast<int>(std::floor(s / h_)), n_ - 2);
  const double u = s / h_ - static_cast<double>(j);
  const double a = 1.0 - u;
  const double b = u;
  const RowVectorXd& tj = T_.row(j);
  const RowVectorXd& tj1 = T_.row(j + 1);
  if (value != nullptr) {
    value->setZero(n_);
    (*value)(j) += a;
    (*value)(j + 1) += b;
    *value += (h_ * h_ / 6.0) * ((a * a * a - a) * tj + (b * b * b - b) * tj1);
  }
  if (deriv != nullptr) {
    deriv->setZero(n_);
    (*deriv)(j) -= 1.0 / h_;
    (*deriv)(j + 1) += 1.0 / h_;
    *deriv += (h_ / 6.0) * ((1.0 - 3.0 * a * a) * tj + (3.0 * b * b - 1.0) * tj1);
  }
}

RowVectorXd NaturalSplineBasis::value_weights(double s) const {
  RowVectorXd w;
  weights_at(s, &w, nullptr);
  return w;
}

RowVectorXd NaturalSplineBasis::derivative_weights(double s) const {
  RowVectorXd w;
  weights_at(s, nullptr, &w);
  return w;
}

VectorXd NaturalSplineBasis::quadrature_nodes(int points) {
  CLOT_REQUIRE(points > 0, "quadrature_nodes: need a positive point count");
  VectorXd s(points);
  for (int m = 0; m < points; ++m) {
    s(m) = (static_cast<double>(m) + 0.5) / static_cast<double>(points);
  }
  return s;
}

MatrixXd NaturalSplineBasis::quadrature_value_weights(int points) const {
  const VectorXd nodes = quadrature_nodes(points);
  MatrixXd w(points, n_);
  for (int m = 0; m < points; ++m) w.row(m) = value_weights(nodes(m));
  return w;
}

MatrixXd NaturalSplineBasis::quadrature_derivative_weights(int points) const {
  const VectorXd nodes = quadrature_nodes(points);
  MatrixXd w(points, n_);
  for (int m = 0; m < points; ++m) w.row(m) = derivative_weights(nodes(m));
  return w;
}

MatrixXd SplinePath::control_points() const {
  const Index k = offsets.cols();
  const Index n = k + 2;
  MatrixXd c(dim(), n);
  c.col(0) = y0;
  c.col(n - 1) = y1;
  for (Index j = 1; j + 1 < n; ++j) {
    const double s = static_cast<double>(j) / static_cast<double>(n - 1);
    c.col(j) = (1.0 - s) * y0 + s * y1 + offsets.col(j - 1);
  }
  return c;
}

PathPoint spline_eval(const SplinePath& path, const NaturalSplineBasis& basis,
                      double s) {
  CLOT_REQUIRE(path.offsets.cols() == basis.interior_knots(),
               "spline_eval: path knot count does not match basis");
  CLOT_REQUIRE(path.y0.size() == path.y1.size() &&
                   (path.offsets.size() == 0 || path.offsets.rows() == path.y0.size()),
               "spline_eval: inconsistent path dimensions");
  const MatrixXd c = path.control_points();
  PathPoint out;
  out.q = c * basis.value_weights(s).transpose();
  out.qdot = c * basis.derivative_weights(s).transpose();
  return out;
}

}  // namespace clot
