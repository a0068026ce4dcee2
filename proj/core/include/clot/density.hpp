#pragma once

#include <map>
#include <memory>

#include "clot/observation_set.hpp"

namespace clot {

/// One condition's view of the estimator: sample points with normalized
/// mixture weights.  Points (and the precomputed pieces of the squared-distance
/// expansion) alias storage owned by the estimator.
struct ResolvedKernel {
  const MatrixXd* points = nullptr;   // dim x n
  const MatrixXd* points_aug = nullptr;  // (dim+1) x n: [2 * points; -1]
  const VectorXd* sq_norms = nullptr;    // n: |p_i|^2
  VectorXd weights;                   // n, sums to 1

  Index count() const { return points == nullptr ? 0 : points->cols(); }
};

/// Kernel-weighted conditional density over pooled observations.  In discrete
/// mode each condition id keeps its own sample set with uniform weights; in
/// continuous mode every query re-weights the full pool with a Gaussian kernel
/// on the condition vector.  Both modes then evaluate an isotropic Gaussian
/// kernel density over the outcome with bandwidth h_y, including its
/// normalizing constant, so values integrate to one over the outcome space.
/// The estimator is frozen at construction: it pools all anchors of the
/// training set and never updates afterwards.
class NwEstimator {
 public:
  struct Options {
    double h_y = 0.05;
    double h_x = 0.0;  // <= 0 selects discrete (exact-match) mode
  };

  NwEstimator(const ObservationSet& data, const Options& opts);

  /// Build directly from pooled points (one condition, uniform weights).
  NwEstimator(MatrixXd points, double h_y);

  double bandwidth_y() const { return h_y_; }
  bool discrete_mode() const { return h_x_ <= 0.0; }
  int dim() const { return dim_; }

  ResolvedKernel resolve(const Condition& x) const;

  /// dens(j) = sum_i w_i K_hy(q_j - p_i); grad columns hold d dens / d q_j.
  void density(const ResolvedKernel& k, const MatrixXd& q, VectorXd& dens) const;
  void density_and_grad(const ResolvedKernel& k, const MatrixXd& q, VectorXd& dens,
                        MatrixXd& grad) const;

  double density1(const VectorXd& q, const Condition& x) const;

 private:
  /// Sample pool plus the constant pieces of |q - p|^2 = |q|^2 + |p|^2 - 2 p.q.
  struct Pool {
    MatrixXd points;   // dim x n
    MatrixXd aug;      // (dim+1) x n: [2 * points; -1]
    VectorXd sq_norms; // n

    explicit Pool(MatrixXd pts);
    Pool() = default;
  };

  void kernel_matrix(const ResolvedKernel& k, const MatrixXd& q, MatrixXd& p) const;

  double h_y_ = 0.0;
  double h_x_ = 0.0;
  int dim_ = 0;
  double prefactor_ = 1.0;                 // (2 pi h_y^2)^(-dim/2)
  std::map<Condition, Pool> by_condition_;  // discrete mode
  Pool all_;                               // continuous mode
  MatrixXd all_conds_;                     // continuous mode: cond_dim x n
};

/// Confinement term derived from the data density: alpha * log(density + eps).
/// alpha = 0 (or a missing estimator) disables the term entirely.
class Potential {
 public:
  Potential() = default;
  Potential(std::shared_ptr<const NwEstimator> kde, double alpha, double eps = 1e-9)
      : kde_(std::move(kde)), alpha_(alpha), eps_(eps) {}

  bool active() const { return alpha_ != 0.0 && kde_ != nullptr; }
  double alpha() const { return alpha_; }
  double epsilon() const { return eps_; }
  const std::shared_ptr<const NwEstimator>& estimator() const { return kde_; }

  ResolvedKernel resolve(const Condition& x) const;

  /// u(j) = alpha * log(dens_j + eps); grad columns hold du/dq_j.
  void value(const ResolvedKernel& k, const MatrixXd& q, VectorXd& u) const;
  void value_and_grad(const ResolvedKernel& k, const MatrixXd& q, VectorXd& u,
                      MatrixXd& grad) const;

  double value1(const VectorXd& q, const Condition& x) const;

 private:
  std::shared_ptr<const NwEstimator> kde_;
  double alpha_ = 0.0;
  double eps_ = 1e-9;
};

}  // namespace clot
