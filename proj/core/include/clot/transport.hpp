#pragma once

#include <memory>
#include <optional>

#include "clot/action.hpp"
#include "clot/condition.hpp"
#include "clot/film_mlp.hpp"

namespace clot {

/// Architecture settings shared by every interval's networks.
struct TransportOptions {
  int d_y = 2;
  int knots = 15;
  int quad_points = 32;
  std::vector<int> hidden_g = {64, 64, 64, 64};
  std::vector<int> hidden_map = {64, 64, 64, 64};
  std::vector<int> hidden_spline = {1024, 1024};
  Activation activation = Activation::kRelu;
  int film_width = 16;
};

/// Everything learned about the dynamics between consecutive anchors: one
/// dual potential g_k and transport map T_k per interval, a single path
/// generator shared across intervals, and the (optional) metric field and
/// density potential that define the path cost.  Owns the spline basis and an
/// action evaluator wired to its own Lagrangian.
class TransportBundle {
 public:
  TransportBundle(std::vector<double> anchor_times, ConditionEncoder encoder,
                  TransportOptions opts,
                  std::optional<MetricField::Options> metric_opts,
                  Potential potential);

  TransportBundle(const TransportBundle&) = delete;
  TransportBundle& operator=(const TransportBundle&) = delete;

  void init(Rng& rng);

  const std::vector<double>& anchor_times() const { return anchor_times_; }
  int interval_count() const { return static_cast<int>(anchor_times_.size()) - 1; }
  const TransportOptions& options() const { return opts_; }
  const ConditionEncoder& encoder() const { return encoder_; }
  const NaturalSplineBasis& basis() const { return basis_; }

  FilmMlp& g(int k);
  const FilmMlp& g(int k) const;
  FilmMlp& map(int k);
  const FilmMlp& map(int k) const;
  FilmMlp& spline_gen() { return spline_gen_; }
  const FilmMlp& spline_gen() const { return spline_gen_; }

  MetricField* metric() { return metric_ ? &*metric_ : nullptr; }
  const MetricField* metric() const { return metric_ ? &*metric_ : nullptr; }
  const Potential& potential() const { return potential_; }

  Lagrangian lagrangian() const { return {metric() , potential_.active() ? &potential_ : nullptr}; }
  const ActionEvaluator& action() const { return *action_; }

  /// T_k applied to columns of y under per-column film state.
  MatrixXd predict_map(int k, const MatrixXd& y, const FilmState& film) const;
  VectorXd predict_map1(int k, const VectorXd& y, const Condition& x) const;

  /// Path-generator offsets for endpoint columns (y0, y1), as (d_y * knots) x n.
  MatrixXd predict_offsets(const MatrixXd& y0, const MatrixXd& y1,
                           const FilmState& film) const;
  SplinePath predict_path1(const VectorXd& y0, const VectorXd& y1,
                           const Condition& x) const;

  /// Film states for a batch of conditions, per network family.
  FilmState film_g(int k, const MatrixXd& encoded) const { return g(k).film(encoded); }
  FilmState film_map(int k, const MatrixXd& encoded) const { return map(k).film(encoded); }
  FilmState film_spline(const MatrixXd& encoded) const { return spline_gen_.film(encoded); }

  GeometryBatch geometry_batch(const std::vector<Condition>& conds) const {
    return make_geometry_batch(lagrangian(), conds, &encoder_);
  }

 private:
  std::vector<double> anchor_times_;
  ConditionEncoder encoder_;
  TransportOptions opts_;
  NaturalSplineBasis basis_;
  std::vector<FilmMlp> g_;
  std::vector<FilmMlp> map_;
  FilmMlp spline_gen_;
  std::optional<MetricField> metric_;
  Potential potential_;
  std::unique_ptr<ActionEvaluator> action_;
};

/// Batched c-transform: for each start point, the path-cost-optimal end point
///   y1* = argmin_y1 [ action(y0 -> y1 | x) - g_k(y1 | x) ],
/// warm-started at the transport map's prediction and refined by lockstep
/// L-BFGS with the path re-generated at every candidate.  `value` holds the
/// c-transform g^c(y0 | x) = action* - g_k(y1*).
struct CTransformBatch {
  MatrixXd y1;       // d x n, refined end points
  VectorXd value;    // g^c per sample
  VectorXd action;   // path action at the optimum
  VectorXd g_at_y1;  // g_k(y1* | x)
  MatrixXd offsets;  // (d * knots) x n, generated path offsets at the optimum
  VectorXi iters;
  int eval_rounds = 0;
};

CTransformBatch c_transform_batch(const TransportBundle& bundle, int k,
                                  const MatrixXd& y0,
                                  const std::vector<Condition>& conds,
                                  int refine_iters, const LbfgsOptions& opts);

struct CTransformResult {
  VectorXd y1;
  double value = 0.0;
  double action = 0.0;
  SplinePath path;
  int iters = 0;
};

CTransformResult c_transform(const TransportBundle& bundle, int k,
                             const VectorXd& y0, const Condition& x,
                             int refine_iters, const LbfgsOptions& opts);

/// Empirical semi-dual objective for interval k:
///   mean_i g^c(y0_i | x_i) + mean_j g_k(y1_j | x_j).
double dual_value(const TransportBundle& bundle, int k, const MatrixXd& y0,
                  const std::vector<Condition>& conds0, const MatrixXd& y1,
                  const std::vector<Condition>& conds1, int refine_iters,
                  const LbfgsOptions& opts);

}  // namespace clot
