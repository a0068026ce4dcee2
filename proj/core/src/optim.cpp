#include "clot/optim.hpp"

#include <cmath>
#include <deque>

namespace clot {

void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state,
               const AdamOptions& opts) {
  CLOT_REQUIRE(grad.size() == params.size(), "adam_step: gradient size mismatch");
  if (!grad.allFinite()) {
    throw numeric_error("adam_step: non-finite gradient");
  }
  if (state.m.size() != params.size()) {
    state.reset(params.size());
  }
  state.step += 1;
  state.m = opts.beta1 * state.m + (1.0 - opts.beta1) * grad;
  state.v = opts.beta2 * state.v.array().matrix() +
            (1.0 - opts.beta2) * grad.array().square().matrix();
  const double bias1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  params.array() -= opts.lr * (state.m.array() / bias1) /
                    ((state.v.array() / bias2).sqrt() + opts.eps);
}

namespace {

/// Curvature pair storage for the two-loop recursion.
struct LbfgsHistory {
  std::deque<VectorXd> s;
  std::deque<VectorXd> y;
  std::deque<double> rho;

  void push(const VectorXd& si, const VectorXd& yi, int memory) {
    const double sy = si.dot(yi);
    if (sy <= 1e-10) return;  // skip non-positive curvature pairs
    s.push_back(si);
    y.push_back(yi);
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > memory) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }

  /// d = -H g with the standard two-loop recursion; H0 = gamma I from the most
  /// recent pair.
  VectorXd direction(const VectorXd& g) const {
    VectorXd q = g;
    const int m = static_cast<int>(s.size());
    std::vector<double> alpha(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] =
          rho[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    if (m > 0) {
      const auto& ylast = y[static_cast<std::size_t>(m - 1)];
      const double gamma =
          s[static_cast<std::size_t>(m - 1)].dot(ylast) / ylast.squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta =
          rho[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)].dot(q);
      q += (alpha[static_cast<std::size_t>(i)] - beta) * s[static_cast<std::size_t>(i)];
    }
    return -q;
  }
};

}  // namespace

LbfgsResult lbfgs_minimize(const LbfgsObjective& fn, const VectorXd& x0,
                           const LbfgsOptions& opts) {
  LbfgsResult res;
  res.x = x0;
  VectorXd g(x0.size());
  res.f = fn(res.x, &g);
  res.evals = 1;
  if (!std::isfinite(res.f) || !g.allFinite()) {
    throw numeric_error("lbfgs_minimize: non-finite objective at start point");
  }

  LbfgsHistory hist;
  double step_len = 0.0;  // last accepted ||alpha d||, for line-search continuity
  for (int it = 0; it < opts.max_iters; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    VectorXd d = hist.direction(g);
    double dd = d.dot(g);
    if (!(dd < 0.0)) {
      hist.clear();
      d = -g;
      dd = d.dot(g);
      if (!(dd < 0.0)) break;  // zero gradient; nothing to do
    }
    // Open each search at twice the previous accepted step length so a stiff
    // objective does not pay the full backtracking ladder every iteration.
    double alpha = 1.0;
    if (it == 0) {
      alpha = std::min(1.0, 1.0 / g.lpNorm<1>());
    } else if (step_len > 0.0 && d.norm() > 0.0) {
      alpha = std::min(1.0, 2.0 * step_len / d.norm());
    }

    bool accepted = false;
    VectorXd x_new, g_new(x0.size());
    double f_new = 0.0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      x_new = res.x + alpha * d;
      f_new = fn(x_new, &g_new);
      ++res.evals;
      if (std::isfinite(f_new) && f_new <= res.f + opts.armijo_c * alpha * dd) {
        accepted = true;
        break;
      }
      alpha *= opts.backtrack_factor;
    }
    if (!accepted) break;  // line search exhausted; current x is still the best seen

    step_len = alpha * d.norm();
    hist.push(x_new - res.x, g_new - g, opts.memory);
    const double df = res.f - f_new;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    ++res.iters;
    if (df <= opts.f_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// ---- lockstep batch ---------------------------------------------------------

namespace {

enum class Phase { kStart, kSearching, kDone };

struct SampleState {
  VectorXd x, g, d;
  double f = 0.0;
  double dd = 0.0;     // directional derivative at the search origin
  double alpha = 1.0;
  double step_len = 0.0;  // last accepted ||alpha d||, for line-search continuity
  int backtracks = 0;
  int iters = 0;
  bool converged = false;
  Phase phase = Phase::kStart;
  LbfgsHistory hist;

  /// Prepare a fresh search direction from the current (x, f, g).
  /// Returns false if no descent is possible (done).
  bool new_direction(const LbfgsOptions& opts) {
    d = hist.direction(g);
    dd = d.dot(g);
    if (!(dd < 0.0)) {
      hist.clear();
      d = -g;
      dd = d.dot(g);
      if (!(dd < 0.0)) return false;
    }
    // Open at twice the previous accepted step length (normalized by the new
    // direction) so stiff objectives do not re-pay the backtracking ladder.
    alpha = 1.0;
    if (iters == 0) {
      alpha = std::min(1.0, 1.0 / g.lpNorm<1>());
    } else if (step_len > 0.0 && d.norm() > 0.0) {
      alpha = std::min(1.0, 2.0 * step_len / d.norm());
    }
    backtracks = 0;
    return true;
  }
};

}  // namespace

BatchedLbfgsResult lbfgs_minimize_batch(BatchedObjective& fn, const MatrixXd& x0,
                                        const LbfgsOptions& opts) {
  const Index dim = fn.dim();
  CLOT_REQUIRE(x0.rows() == dim, "lbfgs_minimize_batch: x0 dimension mismatch");
  const int n = static_cast<int>(x0.cols());

  std::vector<SampleState> st(static_cast<std::size_t>(n));
  std::vector<int> active(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = i;

  BatchedLbfgsResult res;
  res.x = x0;
  res.f = VectorXd::Zero(n);
  res.iters = VectorXi::Zero(n);

  MatrixXd cand(dim, n);
  MatrixXd grad(dim, n);
  VectorXd fval(n);

  while (!active.empty()) {
    const auto n_act = static_cast<Index>(active.size());
    cand.resize(dim, n_act);
    for (Index c = 0; c < n_act; ++c) {
      auto& s = st[static_cast<std::size_t>(active[static_cast<std::size_t>(c)])];
      if (s.phase == Phase::kStart) {
        cand.col(c) = res.x.col(active[static_cast<std::size_t>(c)]);
      } else {
        cand.col(c) = s.x + s.alpha * s.d;
      }
    }
    fval.resize(n_act);
    grad.resize(dim, n_act);
    fn.evaluate(cand, active, fval, &grad);
    ++res.eval_rounds;

    std::vector<int> still;
    still.reserve(active.size());
    for (Index c = 0; c < n_act; ++c) {
      const int id = active[static_cast<std::size_t>(c)];
      auto& s = st[static_cast<std::size_t>(id)];
      const double fc = fval(c);
      const bool finite = std::isfinite(fc) && grad.col(c).allFinite();

      if (s.phase == Phase::kStart) {
        if (!finite) {
          throw numeric_error("lbfgs_minimize_batch: non-finite objective at start point");
        }
        s.x = cand.col(c);
        s.f = fc;
        s.g = grad.col(c);
        s.phase = Phase::kSearching;
        if (opts.max_iters == 0 || s.g.lpNorm<Eigen::Infinity>() <= opts.grad_tol ||
            !s.new_direction(opts)) {
          s.converged = opts.max_iters != 0;
          s.phase = Phase::kDone;
        }
      } else {
        const bool accept =
            finite && fc <= s.f + opts.armijo_c * s.alpha * s.dd;
        if (accept) {
          s.step_len = s.alpha * s.d.norm();
          s.hist.push(cand.col(c) - s.x, grad.col(c) - s.g, opts.memory);
          const double df = s.f - fc;
          s.x = cand.col(c);
          s.f = fc;
          s.g = grad.col(c);
          ++s.iters;
          if (df <= opts.f_tol || s.g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
            s.converged = true;
            s.phase = Phase::kDone;
          } else if (s.iters >= opts.max_iters || !s.new_direction(opts)) {
            s.phase = Phase::kDone;
          }
        } else {
          ++s.backtracks;
          if (s.backtracks > opts.max_backtracks) {
            s.phase = Phase::kDone;  // keep the best (= current) iterate
          } else {
            s.alpha *= opts.backtrack_factor;
          }
        }
      }
      if (s.phase == Phase::kDone) {
        res.x.col(id) = s.x;
        res.f(id) = s.f;
        res.iters(id) = s.iters;
        if (s.converged) ++res.converged;
      } else {
        still.push_back(id);
      }
    }
    active.swap(still);
  }
  return res;
}

}  // namespace clot
