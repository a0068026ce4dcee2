#pragma once

#include <functional>
#include <vector>

#include "clot/param_vector.hpp"

namespace clot {

// ---- Adam -------------------------------------------------------------------

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second-moment accumulators for one parameter vector.
struct AdamState {
  VectorXd m;
  VectorXd v;
  long step = 0;

  void reset(Index n) {
    m = VectorXd::Zero(n);
    v = VectorXd::Zero(n);
    step = 0;
  }
};

/// One Adam descent step in place.  Pass the negated gradient to ascend.
/// Rejects non-finite gradients.
void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state,
               const AdamOptions& opts);

inline void adam_step(ParamVector& params, const VectorXd& grad, AdamState& state,
                      const AdamOptions& opts) {
  adam_step(params.values(), grad, state, opts);
}

// ---- L-BFGS -----------------------------------------------------------------

struct LbfgsOptions {
  int max_iters = 100;
  int memory = 8;
  /// Stop when the gradient infinity-norm falls below this.
  double grad_tol = 1e-7;
  /// Stop when the objective improves by less than this between iterations.
  double f_tol = 1e-9;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 20;
};

struct LbfgsResult {
  VectorXd x;
  double f = 0.0;
  int iters = 0;
  int evals = 0;
  bool converged = false;
};

/// Objective callback: returns f(x); fills *grad when non-null.
using LbfgsObjective = std::function<double(const VectorXd&, VectorXd*)>;

/// Limited-memory BFGS with Armijo backtracking line search.  Guarantees
/// result.f <= f(x0): the best iterate seen is returned, and a failed line
/// search terminates at the current point rather than accepting an increase.
/// max_iters = 0 returns x0 with its objective value.
LbfgsResult lbfgs_minimize(const LbfgsObjective& fn, const VectorXd& x0,
                           const LbfgsOptions& opts);

/// Batch of independent small minimizations advanced in lockstep so that each
/// round of objective evaluations is one batched call.  Implementations
/// receive the still-active subset as columns plus their original indices.
class BatchedObjective {
 public:
  virtual ~BatchedObjective() = default;

  virtual Index dim() const = 0;

  /// Evaluate f for columns of `x` (original sample ids in `idx`), writing
  /// values into `f` and, when `grad` is non-null, gradients into its columns.
  virtual void evaluate(const MatrixXd& x, const std::vector<int>& idx,
                        VectorXd& f, MatrixXd* grad) = 0;
};

struct BatchedLbfgsResult {
  MatrixXd x;          // dim x n
  VectorXd f;          // n
  VectorXi iters;      // per-sample accepted steps
  int eval_rounds = 0; // batched evaluate() calls made
  int converged = 0;   // samples that hit a tolerance before max_iters
};

/// Lockstep variant of lbfgs_minimize for n independent problems of a common
/// small dimension.  Samples that converge (or fail their line search) drop
/// out of subsequent evaluation rounds; per-sample two-loop recursions and
/// Armijo scalings are maintained independently, so results match running
/// lbfgs_minimize on each column (up to evaluation batching).
BatchedLbfgsResult lbfgs_minimize_batch(BatchedObjective& fn, const MatrixXd& x0,
                                        const LbfgsOptions& opts);

}  // namespace clot
