#pragma once

#include "clot/film_mlp.hpp"

namespace clot {

/// Position- and condition-dependent SPD matrix field G(q | x), factorized as
/// R diag(e) R^T with R an ordered product of Givens rotations (index pairs
/// (i, j), i < j, lexicographic) and eigenvalues produced by a softmax scaled
/// to a fixed trace budget.  Both the angles and the eigenvalue logits come
/// from one FiLM-conditioned network, so positive definiteness and the trace
/// budget hold for every parameter setting by construction.  Eigenvalues can
/// instead be frozen to a fixed list, in which case only angles are learned.
class MetricField {
 public:
  struct Options {
    int dim = 2;
    double budget = 2.0;
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::kRelu;
    int condition_dim = 0;
    int film_width = 16;
    bool learn_eigenvalues = true;
    VectorXd fixed_eigenvalues;  // used when learn_eigenvalues == false
  };

  explicit MetricField(const Options& opts);

  void init(Rng& rng) { net_.init(rng); }

  const Options& options() const { return opts_; }
  int dim() const { return opts_.dim; }
  int angle_count() const { return opts_.dim * (opts_.dim - 1) / 2; }
  bool learns_eigenvalues() const { return opts_.learn_eigenvalues; }

  FilmMlp& net() { return net_; }
  const FilmMlp& net() const { return net_; }

  /// Eigenvalue columns from raw network output columns.
  MatrixXd eigenvalues_from_raw(const MatrixXd& raw) const;

  /// Rotation matrix for one angle vector.
  static MatrixXd rotation_from_angles(const VectorXd& angles, int dim);

  struct Decomposition {
    VectorXd angles;
    VectorXd eigenvalues;
    MatrixXd rotation;
  };
  Decomposition decompose(const VectorXd& q, const VectorXd& x_encoded) const;

  /// Full matrix G(q | x).  x_encoded ignored when unconditioned.
  MatrixXd evaluate(const VectorXd& q, const VectorXd& x_encoded = VectorXd()) const;

 private:
  Options opts_;
  FilmMlp net_;
};

/// Batched kinetic-energy kernel over raw metric-net outputs.
///
/// For each column: u = R^T v, kinetic = 1/2 sum_d e_d u_d^2.  The backward
/// pass takes per-column cotangents and produces cotangents for the raw
/// network outputs and for v.  All loops are over the (few) rotation planes;
/// per-plane work is vectorized across columns.
struct KineticWorkspace {
  MatrixXd u;     // dim x cols, rotated velocities
  MatrixXd eigs;  // dim x cols
};

/// `raw` may be empty when the metric is absent (identity kinetic term).
void kinetic_forward(const MetricField* metric, const MatrixXd& raw,
                     const MatrixXd& v, VectorXd& kin, KineticWorkspace* ws);

/// `cot` scales each column's kinetic value.  Outputs are overwritten:
/// `raw_cot` gets d kin / d raw (empty when metric absent), `v_cot` gets
/// d kin / d v.
void kinetic_backward(const MetricField* metric, const MatrixXd& raw,
                      const MatrixXd& v, const KineticWorkspace& ws,
                      const RowVectorXd& cot, MatrixXd& raw_cot, MatrixXd& v_cot);

}  // namespace clot
