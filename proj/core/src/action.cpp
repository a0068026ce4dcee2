#include "clot/action.hpp"

#include <cmath>

namespace clot {

using StridedMap = Eigen::Map<MatrixXd, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedMap =
    Eigen::Map<const MatrixXd, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

GeometryBatch GeometryBatch::select(const std::vector<int>& idx) const {
  GeometryBatch out;
  out.count = static_cast<Index>(idx.size());
  if (encoded.size() > 0) {
    out.encoded.resize(encoded.rows(), out.count);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      out.encoded.col(static_cast<Index>(p)) = encoded.col(idx[p]);
    }
  }
  if (has_metric_film) {
    out.metric_film = metric_film.select(idx);
    out.has_metric_film = true;
  }
  if (!groups.empty()) {
    std::vector<int> newpos(static_cast<std::size_t>(count), -1);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      newpos[static_cast<std::size_t>(idx[p])] = static_cast<int>(p);
    }
    for (const auto& g : groups) {
      PotentialGroup ng;
      ng.kernel = g.kernel;
      for (int c : g.cols) {
        const int np = newpos[static_cast<std::size_t>(c)];
        if (np >= 0) ng.cols.push_back(np);
      }
      if (!ng.cols.empty()) out.groups.push_back(std::move(ng));
    }
  }
  return out;
}

GeometryBatch make_geometry_batch(const Lagrangian& lag,
                                  const std::vector<Condition>& conds,
                                  const ConditionEncoder* encoder) {
  GeometryBatch b;
  b.count = static_cast<Index>(conds.size());
  if (lag.metric != nullptr && lag.metric->net().conditioned()) {
    CLOT_REQUIRE(encoder != nullptr,
                 "make_geometry_batch: conditioned metric needs an encoder");
    b.encoded = encoder->encode_batch(conds);
    b.metric_film = lag.metric->net().film(b.encoded);
    b.has_metric_film = true;
  }
  if (lag.potential != nullptr && lag.potential->active()) {
    std::map<Condition, std::vector<int>> by_cond;
    for (std::size_t i = 0; i < conds.size(); ++i) {
      by_cond[conds[i]].push_back(static_cast<int>(i));
    }
    for (auto& [cond, cols] : by_cond) {
      GeometryBatch::PotentialGroup g;
      g.cols = std::move(cols);
      g.kernel = lag.potential->resolve(cond);
      b.groups.push_back(std::move(g));
    }
  }
  return b;
}

GeometryBatch make_geometry_batch(const Lagrangian& lag, const Condition& cond,
                                  const ConditionEncoder* encoder) {
  return make_geometry_batch(lag, std::vector<Condition>{cond}, encoder);
}

ActionEvaluator::ActionEvaluator(const Lagrangian& lag,
                                 const NaturalSplineBasis& basis, int quad_points)
    : lag_(lag), basis_(basis), quad_(quad_points) {
  CLOT_REQUIRE(quad_points > 0, "ActionEvaluator: quad_points must be positive");
  wv_ = basis.quadrature_value_weights(quad_points);
  wd_ = basis.quadrature_derivative_weights(quad_points);
  const int nc = basis.control_count();
  lerp_s_.resize(nc);
  for (int j = 0; j < nc; ++j) {
    lerp_s_(j) = static_cast<double>(j) / static_cast<double>(nc - 1);
  }
}

ActionEvaluator::Result ActionEvaluator::evaluate(const MatrixXd& y0,
                                                  const MatrixXd& y1,
                                                  const MatrixXd& offsets,
                                                  const GeometryBatch& conds,
                                                  const Request& req) const {
  const Index n = y0.cols();
  const Index dim = y0.rows();
  const int k = basis_.interior_knots();
  const int nc = basis_.control_count();
  const int m = quad_;
  CLOT_REQUIRE(y1.rows() == dim && y1.cols() == n, "ActionEvaluator: y1 shape mismatch");
  CLOT_REQUIRE(offsets.cols() == n && offsets.rows() == dim * k,
               "ActionEvaluator: offsets shape mismatch");
  CLOT_REQUIRE(conds.count == n, "ActionEvaluator: condition batch size mismatch");
  const MetricField* metric = lag_.metric;
  if (metric != nullptr) {
    CLOT_REQUIRE(metric->dim() == dim, "ActionEvaluator: metric dimension mismatch");
    CLOT_REQUIRE(!metric->net().conditioned() || conds.has_metric_film,
                 "ActionEvaluator: conditioned metric needs film state in batch");
  }
  const bool need_back = req.endpoint_grads || req.offset_grads ||
                         req.metric_param_grad != nullptr;
  const Index cols = n * m;

  // Positions and velocities at all quadrature nodes, one column per
  // (sample, node) pair with node fastest.
  MatrixXd qcols(dim, cols), vcols(dim, cols);
  const auto row_view = [&](MatrixXd& mat, Index d) {
    return StridedMap(mat.data() + d, m, n,
                      Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(dim * m, dim));
  };
  MatrixXd cd(nc, n), qd(m, n), vd(m, n);
  for (Index d = 0; d < dim; ++d) {
    cd.noalias() = (VectorXd::Ones(nc) - lerp_s_) * y0.row(d);
    cd.noalias() += lerp_s_ * y1.row(d);
    for (int j = 1; j <= k; ++j) {
      cd.row(j) += offsets.row(d + dim * (j - 1));
    }
    qd.noalias() = wv_ * cd;
    vd.noalias() = wd_ * cd;
    row_view(qcols, d) = qd;
    row_view(vcols, d) = vd;
  }

  // Kinetic term.
  MatrixXd raw;
  MlpCache cache;
  const FilmState* film = conds.has_metric_film ? &conds.metric_film : nullptr;
  if (metric != nullptr) {
    raw = metric->net().forward(qcols, film, film != nullptr ? m : 1,
                                need_back ? &cache : nullptr);
  }
  VectorXd kin;
  KineticWorkspace ws;
  kinetic_forward(metric, raw, vcols, kin, need_back ? &ws : nullptr);

  // Potential term.
  VectorXd upot;
  MatrixXd du;
  const bool has_pot = lag_.potential != nullptr && lag_.potential->active();
  if (has_pot) {
    CLOT_REQUIRE(!conds.groups.empty(), "ActionEvaluator: potential needs kernel groups");
    upot = VectorXd::Zero(cols);
    if (need_back) du.setZero(dim, cols);
    MatrixXd qg, dug;
    VectorXd ug;
    for (const auto& g : conds.groups) {
      const Index gn = static_cast<Index>(g.cols.size());
      qg.resize(dim, gn * m);
      for (Index a = 0; a < gn; ++a) {
        qg.middleCols(a * m, m) = qcols.middleCols(g.cols[static_cast<std::size_t>(a)] * m, m);
      }
      if (need_back) {
        lag_.potential->value_and_grad(g.kernel, qg, ug, dug);
      } else {
        lag_.potential->value(g.kernel, qg, ug);
      }
      for (Index a = 0; a < gn; ++a) {
        const Index base = static_cast<Index>(g.cols[static_cast<std::size_t>(a)]) * m;
        upot.segment(base, m) = ug.segment(a * m, m);
        if (need_back) du.middleCols(base, m) = dug.middleCols(a * m, m);
      }
    }
  }

  Result res;
  const double inv_m = 1.0 / static_cast<double>(m);
  {
    Eigen::Map<const MatrixXd> kin_mat(kin.data(), m, n);
    res.action = inv_m * kin_mat.colwise().sum().transpose();
    if (has_pot) {
      Eigen::Map<const MatrixXd> up_mat(upot.data(), m, n);
      res.action -= inv_m * up_mat.colwise().sum().transpose();
    }
  }
  if (!need_back) return res;

  // Reverse pass: each quadrature node carries weight 1/m toward its sample's
  // action value.
  const RowVectorXd cot = RowVectorXd::Constant(cols, inv_m);
  MatrixXd raw_cot, v_cot;
  kinetic_backward(metric, raw, vcols, ws, cot, raw_cot, v_cot);

  MatrixXd dq = MatrixXd::Zero(dim, cols);
  if (metric != nullptr) {
    const bool want_params = req.metric_param_grad != nullptr;
    FilmCotangents film_cot;
    if (want_params) {
      ParamVector scratch(metric->net().layout());
      metric->net().backward(raw_cot, cache, film, &scratch, &dq,
                             film != nullptr ? &film_cot : nullptr);
      if (film != nullptr) {
        metric->net().film_backward(film_cot, conds.encoded, conds.metric_film,
                                    &scratch, nullptr);
      }
      req.metric_param_grad->values() += req.param_scale * scratch.values();
    } else {
      metric->net().backward(raw_cot, cache, film, nullptr, &dq, nullptr);
    }
  }
  if (has_pot) {
    dq.noalias() -= inv_m * du;
  }
  if (!req.endpoint_grads && !req.offset_grads) return res;

  if (req.endpoint_grads) {
    res.d_y0.resize(dim, n);
    res.d_y1.resize(dim, n);
  }
  if (req.offset_grads) res.d_offsets.resize(dim * k, n);
  const VectorXd one_minus_s = VectorXd::Ones(nc) - lerp_s_;
  MatrixXd dcd(nc, n);
  for (Index d = 0; d < dim; ++d) {
    qd = row_view(dq, d);
    vd = row_view(v_cot, d);
    dcd.noalias() = wv_.transpose() * qd;
    dcd.noalias() += wd_.transpose() * vd;
    if (req.offset_grads) {
      for (int j = 1; j <= k; ++j) {
        res.d_offsets.row(d + dim * (j - 1)) = dcd.row(j);
      }
    }
    if (req.endpoint_grads) {
      res.d_y0.row(d).noalias() = one_minus_s.transpose() * dcd;
      res.d_y1.row(d).noalias() = lerp_s_.transpose() * dcd;
    }
  }
  return res;
}

double ActionEvaluator::value1(const SplinePath& path, const GeometryBatch& cond) const {
  const Index dim = path.dim();
  const int k = basis_.interior_knots();
  CLOT_REQUIRE(path.offsets.cols() == k, "value1: path knot count mismatch");
  MatrixXd offsets_flat(dim * k, 1);
  if (k > 0) {
    offsets_flat.col(0) =
        Eigen::Map<const VectorXd>(path.offsets.data(), path.offsets.size());
  }
  Request req;
  const Result r = evaluate(path.y0, path.y1, offsets_flat, cond, req);
  return r.action(0);
}

GeodesicResult lagrangian_cost(const ActionEvaluator& eval, const VectorXd& y0,
                               const VectorXd& y1, const GeometryBatch& cond,
                               const MatrixXd& offsets_init,
                               const LbfgsOptions& solver) {
  const Index dim = y0.size();
  const int k = eval.basis().interior_knots();
  CLOT_REQUIRE(y1.size() == dim, "lagrangian_cost: endpoint dimension mismatch");
  CLOT_REQUIRE(cond.count == 1, "lagrangian_cost: expects a single-condition batch");

  MatrixXd init = offsets_init;
  if (init.size() == 0) init = MatrixXd::Zero(dim, k);
  CLOT_REQUIRE(init.rows() == dim && init.cols() == k,
               "lagrangian_cost: bad initial offsets shape");

  GeodesicResult out;
  out.path.y0 = y0;
  out.path.y1 = y1;
  if (k == 0) {
    out.path.offsets = MatrixXd(dim, 0);
    out.action = eval.value1(out.path, cond);
    out.converged = true;
    return out;
  }

  const MatrixXd y0m = y0, y1m = y1;
  auto objective = [&](const VectorXd& x, VectorXd* grad) -> double {
    ActionEvaluator::Request req;
    req.offset_grads = grad != nullptr;
    const auto r = eval.evaluate(y0m, y1m, x, cond, req);
    if (grad != nullptr) *grad = r.d_offsets.col(0);
    return r.action(0);
  };
  const VectorXd x0 = Eigen::Map<const VectorXd>(init.data(), init.size());
  const LbfgsResult res = lbfgs_minimize(objective, x0, solver);
  out.path.offsets = Eigen::Map<const MatrixXd>(res.x.data(), dim, k);
  out.action = res.f;
  out.iters = res.iters;
  out.converged = res.converged;
  return out;
}

}  // namespace clot
