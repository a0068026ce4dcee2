#include "clot/density.hpp"

#include <cmath>
#include <numbers>

namespace clot {

NwEstimator::Pool::Pool(MatrixXd pts) : points(std::move(pts)) {
  aug.resize(points.rows() + 1, points.cols());
  aug.topRows(points.rows()) = 2.0 * points;
  aug.row(points.rows()).setConstant(-1.0);
  sq_norms = points.colwise().squaredNorm();
}

NwEstimator::NwEstimator(const ObservationSet& data, const Options& opts) {
  CLOT_REQUIRE(opts.h_y > 0.0, "NwEstimator: h_y must be positive");
  CLOT_REQUIRE(data.finalized(), "NwEstimator: observation set not finalized");
  h_y_ = opts.h_y;
  h_x_ = opts.h_x;
  dim_ = data.dim();
  prefactor_ = std::pow(2.0 * std::numbers::pi * h_y_ * h_y_, -0.5 * dim_);

  if (discrete_mode()) {
    // Pool every anchor's samples per condition.
    std::map<Condition, std::vector<Index>> rows;
    for (Index i = 0; i < data.size(); ++i) {
      rows[data.record(i).x].push_back(i);
    }
    for (const auto& [cond, idx] : rows) {
      MatrixXd pts(dim_, static_cast<Index>(idx.size()));
      for (std::size_t c = 0; c < idx.size(); ++c) {
        pts.col(static_cast<Index>(c)) = data.record(idx[c]).y;
      }
      by_condition_.emplace(cond, Pool(std::move(pts)));
    }
  } else {
    CLOT_REQUIRE(!data.discrete_conditions(),
                 "NwEstimator: h_x given but conditions are discrete");
    MatrixXd pts(dim_, data.size());
    all_conds_.resize(data.condition_dim(), data.size());
    for (Index i = 0; i < data.size(); ++i) {
      pts.col(i) = data.record(i).y;
      all_conds_.col(i) = data.record(i).x.vec();
    }
    all_ = Pool(std::move(pts));
  }
}

NwEstimator::NwEstimator(MatrixXd points, double h_y) {
  CLOT_REQUIRE(h_y > 0.0, "NwEstimator: h_y must be positive");
  CLOT_REQUIRE(points.cols() > 0, "NwEstimator: empty point set");
  h_y_ = h_y;
  h_x_ = 0.0;
  dim_ = static_cast<int>(points.rows());
  prefactor_ = std::pow(2.0 * std::numbers::pi * h_y_ * h_y_, -0.5 * dim_);
  by_condition_.emplace(Condition::discrete(0), Pool(std::move(points)));
}

ResolvedKernel NwEstimator::resolve(const Condition& x) const {
  ResolvedKernel k;
  const auto bind = [&k](const Pool& pool) {
    k.points = &pool.points;
    k.points_aug = &pool.aug;
    k.sq_norms = &pool.sq_norms;
  };
  if (discrete_mode()) {
    auto it = by_condition_.find(x);
    if (it == by_condition_.end() && by_condition_.size() == 1 &&
        by_condition_.begin()->first == Condition::discrete(0)) {
      it = by_condition_.begin();  // single unconditioned pool
    }
    if (it == by_condition_.end()) {
      throw validation_error("density query at a condition with no samples");
    }
    bind(it->second);
    const Index n = it->second.points.cols();
    k.weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return k;
  }
  CLOT_REQUIRE(!x.is_discrete(), "NwEstimator: continuous condition expected");
  CLOT_VALIDATE(x.vec().size() == all_conds_.rows(),
                "condition vector dimension mismatch");
  // Stabilized softmax over -|x - x_i|^2 / (2 h_x^2); the Gaussian prefactor
  // cancels in the weight normalization.
  VectorXd d2 = (all_conds_.colwise() - x.vec()).colwise().squaredNorm();
  VectorXd logw = -d2 / (2.0 * h_x_ * h_x_);
  const double shift = logw.maxCoeff();
  k.weights = (logw.array() - shift).exp();
  k.weights /= k.weights.sum();
  bind(all_);
  return k;
}

void NwEstimator::kernel_matrix(const ResolvedKernel& k, const MatrixXd& q,
                                MatrixXd& p) const {
  CLOT_REQUIRE(k.points != nullptr, "NwEstimator: unresolved kernel");
  CLOT_REQUIRE(q.rows() == dim_, "NwEstimator: query dimension mismatch");
  // 2 p_i . q_j - |q_j|^2 arrives straight from one product with the augmented
  // point matrix [2p; -1] against [q; |q|^2]; |p_i|^2 is a column broadcast.
  MatrixXd qa(dim_ + 1, q.cols());
  qa.topRows(dim_) = q;
  qa.row(dim_) = q.colwise().squaredNorm();
  p.noalias() = k.points_aug->transpose() * qa;
  p.colwise() -= *k.sq_norms;
  // p holds -|q - p|^2; one linear pass keeps the exp vectorized.
  p = (p / (2.0 * h_y_ * h_y_)).array().exp() * prefactor_;
}

void NwEstimator::density(const ResolvedKernel& k, const MatrixXd& q,
                          VectorXd& dens) const {
  MatrixXd p;
  kernel_matrix(k, q, p);
  dens.noalias() = p.transpose() * k.weights;
}

void NwEstimator::density_and_grad(const ResolvedKernel& k, const MatrixXd& q,
                                   VectorXd& dens, MatrixXd& grad) const {
  MatrixXd p;
  kernel_matrix(k, q, p);
  // c_ij = w_i p_ij; dens_j = sum_i c_ij;
  // d dens_j / d q_j = (sum_i c_ij (p_i - q_j)) / h^2.
  // Weights are folded into p in place to avoid a second kernel-sized matrix.
  p.array().colwise() *= k.weights.array();
  dens = p.colwise().sum();
  grad.noalias() = (*k.points) * p;
  grad -= q * dens.asDiagonal();
  grad /= h_y_ * h_y_;
}

double NwEstimator::density1(const VectorXd& q, const Condition& x) const {
  const ResolvedKernel k = resolve(x);
  VectorXd dens;
  density(k, q, dens);
  return dens(0);
}

ResolvedKernel Potential::resolve(const Condition& x) const {
  CLOT_REQUIRE(active(), "Potential::resolve on an inactive potential");
  return kde_->resolve(x);
}

void Potential::value(const ResolvedKernel& k, const MatrixXd& q, VectorXd& u) const {
  CLOT_REQUIRE(active(), "Potential::value on an inactive potential");
  VectorXd dens;
  kde_->density(k, q, dens);
  u = alpha_ * (dens.array() + eps_).log();
}

void Potential::value_and_grad(const ResolvedKernel& k, const MatrixXd& q,
                               VectorXd& u, MatrixXd& grad) const {
  CLOT_REQUIRE(active(), "Potential::value_and_grad on an inactive potential");
  VectorXd dens;
  kde_->density_and_grad(k, q, dens, grad);
  u = alpha_ * (dens.array() + eps_).log();
  // du/dq = alpha * ddens/dq / (dens + eps)
  grad *= alpha_;
  grad.array().rowwise() /= (dens.transpose().array() + eps_);
}

double Potential::value1(const VectorXd& q, const Condition& x) const {
  const ResolvedKernel k = resolve(x);
  VectorXd u;
  value(k, q, u);
  return u(0);
}

}  // namespace clot
