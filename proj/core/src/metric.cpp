#include "clot/metric.hpp"

#include <cmath>

namespace clot {
namespace {

/// Lexicographic (i, j) plane for rotation index l in a dim x dim rotation.
std::pair<int, int> plane_of(int l, int dim) {
  for (int i = 0, k = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j, ++k) {
      if (k == l) return {i, j};
    }
  }
  throw contract_error("plane_of: rotation index out of range");
}

}  // namespace

MetricField::MetricField(const Options& opts) : opts_(opts) {
  CLOT_REQUIRE(opts.dim >= 1, "MetricField: dim must be >= 1");
  CLOT_REQUIRE(opts.budget > 0.0, "MetricField: trace budget must be positive");
  if (!opts.learn_eigenvalues) {
    CLOT_REQUIRE(opts.fixed_eigenvalues.size() == opts.dim,
                 "MetricField: fixed eigenvalue list must have one entry per dimension");
    CLOT_REQUIRE((opts.fixed_eigenvalues.array() > 0.0).all(),
                 "MetricField: fixed eigenvalues must be positive");
  }
  MlpConfig cfg;
  cfg.input_dim = opts.dim;
  cfg.output_dim = angle_count() + (opts.learn_eigenvalues ? opts.dim : 0);
  CLOT_REQUIRE(cfg.output_dim > 0,
               "MetricField: nothing to learn (dim 1 with fixed eigenvalues)");
  cfg.hidden = opts.hidden;
  cfg.activation = opts.activation;
  cfg.condition_dim = opts.condition_dim;
  cfg.film_width = opts.film_width;
  net_ = FilmMlp(cfg);
}

MatrixXd MetricField::eigenvalues_from_raw(const MatrixXd& raw) const {
  if (!opts_.learn_eigenvalues) {
    return opts_.fixed_eigenvalues.replicate(1, raw.cols());
  }
  MatrixXd logits = raw.bottomRows(opts_.dim);
  // Column-stabilized softmax scaled to the trace budget.
  logits.array().rowwise() -= logits.colwise().maxCoeff().array();
  MatrixXd e = logits.array().exp();
  e.array().rowwise() /= e.colwise().sum().array();
  return opts_.budget * e;
}

MatrixXd MetricField::rotation_from_angles(const VectorXd& angles, int dim) {
  const int m = dim * (dim - 1) / 2;
  CLOT_REQUIRE(angles.size() == m, "rotation_from_angles: wrong angle count");
  MatrixXd r = MatrixXd::Identity(dim, dim);
  for (int l = 0; l < m; ++l) {
    const auto [i, j] = plane_of(l, dim);
    const double c = std::cos(angles(l));
    const double s = std::sin(angles(l));
    const VectorXd ci = r.col(i);
    const VectorXd cj = r.col(j);
    r.col(i) = c * ci + s * cj;
    r.col(j) = -s * ci + c * cj;
  }
  return r;
}

MetricField::Decomposition MetricField::decompose(const VectorXd& q,
                                                  const VectorXd& x_encoded) const {
  MatrixXd raw;
  if (net_.conditioned()) {
    raw = net_.forward_cond(q, x_encoded);
  } else {
    raw = net_.forward(q);
  }
  Decomposition d;
  d.angles = raw.topRows(angle_count()).col(0);
  d.eigenvalues = eigenvalues_from_raw(raw).col(0);
  d.rotation = rotation_from_angles(d.angles, opts_.dim);
  return d;
}

MatrixXd MetricField::evaluate(const VectorXd& q, const VectorXd& x_encoded) const {
  const Decomposition d = decompose(q, x_encoded);
  return d.rotation * d.eigenvalues.asDiagonal() * d.rotation.transpose();
}

void kinetic_forward(const MetricField* metric, const MatrixXd& raw,
                     const MatrixXd& v, VectorXd& kin, KineticWorkspace* ws) {
  const Index cols = v.cols();
  MatrixXd u = v;
  if (metric != nullptr) {
    const int dim = metric->dim();
    const int m = metric->angle_count();
    CLOT_REQUIRE(raw.cols() == cols, "kinetic_forward: raw batch mismatch");
    // u = R^T v: apply plane rotations transposed, first plane first.
    for (int l = 0; l < m; ++l) {
      const auto [i, j] = plane_of(l, dim);
      const auto c = raw.row(l).array().cos();
      const auto s = raw.row(l).array().sin();
      const Eigen::ArrayXXd ui = u.row(i).array();
      const Eigen::ArrayXXd uj = u.row(j).array();
      u.row(i) = c * ui + s * uj;
      u.row(j) = -s * ui + c * uj;
    }
    MatrixXd eigs = metric->eigenvalues_from_raw(raw);
    kin = 0.5 * (eigs.array() * u.array().square()).colwise().sum().transpose();
    if (ws != nullptr) {
      ws->u = std::move(u);
      ws->eigs = std::move(eigs);
    }
  } else {
    kin = 0.5 * u.colwise().squaredNorm().transpose();
    if (ws != nullptr) {
      ws->u = std::move(u);
      ws->eigs.resize(0, 0);
    }
  }
}

void kinetic_backward(const MetricField* metric, const MatrixXd& raw,
                      const MatrixXd& v, const KineticWorkspace& ws,
                      const RowVectorXd& cot, MatrixXd& raw_cot, MatrixXd& v_cot) {
  if (metric == nullptr) {
    raw_cot.resize(0, 0);
    v_cot = v.array().rowwise() * cot.array();
    return;
  }
  const int dim = metric->dim();
  const int m = metric->angle_count();
  const Index cols = v.cols();
  raw_cot.resize(raw.rows(), cols);

  // Eigenvalue path: t_d = cot * u_d^2 / 2.
  MatrixXd t = 0.5 * ws.u.array().square();
  t.array().rowwise() *= cot.array();
  if (metric->learns_eigenvalues()) {
    // e = B softmax(z); dz = e .* (t - (e . t) / B).
    const double budget = metric->options().budget;
    RowVectorXd inner = (ws.eigs.array() * t.array()).colwise().sum() / budget;
    MatrixXd dz = t;
    dz.array().rowwise() -= inner.array();
    dz.array() *= ws.eigs.array();
    raw_cot.bottomRows(dim) = dz;
  }

  // du = cot * (e .* u); reverse sweep un-rotates state and cotangent together
  // while collecting angle gradients.
  MatrixXd cvec = (ws.eigs.array() * ws.u.array()).matrix();
  cvec.array().rowwise() *= cot.array();
  MatrixXd p = ws.u;
  for (int l = m - 1; l >= 0; --l) {
    const auto [i, j] = plane_of(l, dim);
    // With o = G_l^T p_prev the angle derivative is (do_i, do_j) = (o_j, -o_i),
    // so the gradient only needs the post-rotation state held in p.
    raw_cot.row(l) = (cvec.row(i).array() * p.row(j).array() -
                      cvec.row(j).array() * p.row(i).array())
                         .matrix();
    const auto c = raw.row(l).array().cos();
    const auto s = raw.row(l).array().sin();
    const Eigen::ArrayXXd pi = p.row(i).array();
    const Eigen::ArrayXXd pj = p.row(j).array();
    p.row(i) = c * pi - s * pj;
    p.row(j) = s * pi + c * pj;
    const Eigen::ArrayXXd ci = cvec.row(i).array();
    const Eigen::ArrayXXd cj = cvec.row(j).array();
    cvec.row(i) = c * ci - s * cj;
    cvec.row(j) = s * ci + c * cj;
  }
  v_cot = std::move(cvec);
}

}  // namespace clot
