#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "clot/action.hpp"
#include "clot/density.hpp"
#include "clot/grad_check.hpp"
#include "clot/metric.hpp"
#include "clot/rng.hpp"
#include "clot/spline.hpp"

using namespace clot;

TEST_SUITE_BEGIN("geometry");

namespace {

MetricField random_metric(int dim, int cond_dim, bool learn_eigs, Rng& rng) {
  MetricField::Options opts;
  opts.dim = dim;
  opts.budget = 2.0;
  opts.hidden = {16, 16};
  opts.condition_dim = cond_dim;
  opts.learn_eigenvalues = learn_eigs;
  if (!learn_eigs) {
    opts.fixed_eigenvalues = VectorXd(dim);
    for (int i = 0; i < dim; ++i) opts.fixed_eigenvalues[i] = i == 0 ? 1.0 : 0.1;
  }
  MetricField m(opts);
  m.init(rng);
  // init() zeroes biases and the film output; perturb everything so probes
  // see a generic (non-identity) field.
  m.net().params().values() +=
      0.3 * VectorXd::NullaryExpr(m.net().params().size(), [&] { return rng.normal(); });
  return m;
}

}  // namespace

// ==== metric field ===========================================================

TEST_CASE("metric evaluations are SPD with the exact trace budget") {
  Rng rng(41);
  for (int dim : {2, 3, 5}) {
    MetricField m = random_metric(dim, 3, true, rng);
    for (int probe = 0; probe < 1000 / dim; ++probe) {
      const VectorXd q = VectorXd::NullaryExpr(dim, [&] { return 2.0 * rng.normal(); });
      const VectorXd x = VectorXd::NullaryExpr(3, [&] { return rng.normal(); });
      const MatrixXd g = m.evaluate(q, x);
      REQUIRE(g.rows() == dim);
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      CHECK(es.eigenvalues().sum() == doctest::Approx(2.0).epsilon(1e-6));
      CHECK(g.trace() == doctest::Approx(2.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("no parameter setting can shrink the trace below the budget") {
  Rng rng(42);
  MetricField::Options opts;
  opts.dim = 3;
  opts.budget = 3.0;
  opts.hidden = {8};
  MetricField m(opts);
  m.init(rng);
  for (int trial = 0; trial < 50; ++trial) {
    // Adversarially large parameter draws, not train-time perturbations.
    m.net().params().values() =
        10.0 * VectorXd::NullaryExpr(m.net().params().size(), [&] { return rng.normal(); });
    const VectorXd q = VectorXd::NullaryExpr(3, [&] { return rng.normal(); });
    const MatrixXd g = m.evaluate(q);
    CHECK(g.trace() >= 3.0 - 1e-6);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
    CHECK(es.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("rotations from random angles are orthogonal") {
  Rng rng(43);
  for (int dim : {2, 3, 4, 6}) {
    const int n_angles = dim * (dim - 1) / 2;
    for (int trial = 0; trial < 25; ++trial) {
      const VectorXd angles =
          VectorXd::NullaryExpr(n_angles, [&] { return rng.uniform(-6.0, 6.0); });
      const MatrixXd r = MetricField::rotation_from_angles(angles, dim);
      CHECK((r.transpose() * r - MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() <=
            1e-8);
      CHECK(std::abs(std::abs(r.determinant()) - 1.0) <= 1e-8);
    }
  }
}

TEST_CASE("two-dimensional decomposition matches the explicit givens form") {
  Rng rng(44);
  MetricField m = random_metric(2, 0, true, rng);
  const VectorXd q = VectorXd::NullaryExpr(2, [&] { return rng.normal(); });
  const auto dec = m.decompose(q, VectorXd());
  REQUIRE(dec.angles.size() == 1);
  const double t = dec.angles[0];
  MatrixXd r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  CHECK((dec.rotation - r).cwiseAbs().maxCoeff() <= 1e-12);

  const MatrixXd g = m.evaluate(q);
  const MatrixXd rebuilt =
      dec.rotation * dec.eigenvalues.asDiagonal() * dec.rotation.transpose();
  CHECK((g - rebuilt).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fixed eigenvalue lists bypass the softmax") {
  Rng rng(45);
  MetricField m = random_metric(2, 0, false, rng);
  CHECK(!m.learns_eigenvalues());
  const auto dec = m.decompose(VectorXd::Zero(2), VectorXd());
  CHECK(dec.eigenvalues[0] == 1.0);
  CHECK(dec.eigenvalues[1] == 0.1);
}

TEST_CASE("kinetic kernel and its gradients") {
  Rng rng(46);
  MetricField m = random_metric(2, 0, true, rng);
  const int n = 6;
  const MatrixXd q = MatrixXd::NullaryExpr(2, n, [&] { return rng.normal(); });
  const MatrixXd v = MatrixXd::NullaryExpr(2, n, [&] { return rng.normal(); });
  const MatrixXd raw = m.net().forward(q);

  VectorXd kin;
  KineticWorkspace ws;
  kinetic_forward(&m, raw, v, kin, &ws);
  for (int j = 0; j < n; ++j) {
    const MatrixXd g = m.evaluate(q.col(j));
    CHECK(kin[j] == doctest::Approx(0.5 * v.col(j).dot(g * v.col(j))).epsilon(1e-10));
  }

  const RowVectorXd cot = RowVectorXd::NullaryExpr(n, [&] { return rng.normal(); });
  MatrixXd raw_cot, v_cot;
  kinetic_backward(&m, raw, v, ws, cot, raw_cot, v_cot);

  auto total = [&](const MatrixXd& raw_in, const MatrixXd& v_in) {
    VectorXd k2;
    KineticWorkspace ws2;
    kinetic_forward(&m, raw_in, v_in, k2, &ws2);
    return (cot * k2)(0, 0);
  };
  auto flat_check = [&](const MatrixXd& at, const MatrixXd& analytic, bool is_raw) {
    const VectorXd x0 = Eigen::Map<const VectorXd>(at.data(), at.size());
    const VectorXd a = Eigen::Map<const VectorXd>(analytic.data(), analytic.size());
    auto fn = [&](const VectorXd& x) {
      const MatrixXd mat = Eigen::Map<const MatrixXd>(x.data(), at.rows(), at.cols());
      return is_raw ? total(mat, v) : total(raw, mat);
    };
    return check_gradient(fn, x0, a, 1e-6).max_rel_error;
  };
  CHECK(flat_check(raw, raw_cot, true) <= 1e-6);
  CHECK(flat_check(v, v_cot, false) <= 1e-6);

  // Identity fallback: no metric, kinetic is plain half squared speed.
  VectorXd kin_id;
  kinetic_forward(nullptr, MatrixXd(), v, kin_id, nullptr);
  for (int j = 0; j < n; ++j) {
    CHECK(kin_id[j] == doctest::Approx(0.5 * v.col(j).squaredNorm()).epsilon(1e-12));
  }
}

// ==== spline =================================================================

TEST_CASE("spline reproduces affine data and pins endpoints") {
  NaturalSplineBasis basis(15);
  CHECK(basis.control_count() == 17);

  VectorXd y0(2), y1(2);
  y0 << -1.0, 2.0;
  y1 << 3.0, -0.5;
  SplinePath path{y0, y1, MatrixXd::Zero(2, 15)};

  for (double s : {0.0, 0.17, 0.5, 0.83, 1.0}) {
    const auto pt = spline_eval(path, basis, s);
    CHECK((pt.q - (y0 + s * (y1 - y0))).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((pt.qdot - (y1 - y0)).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK((spline_eval(path, basis, 0.0).q - y0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((spline_eval(path, basis, 1.0).q - y1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("displaced knots are interpolated exactly") {
  Rng rng(47);
  const int knots = 5;
  NaturalSplineBasis basis(knots);
  SplinePath path{VectorXd::Zero(2), VectorXd::Ones(2),
                  MatrixXd::NullaryExpr(2, knots, [&] { return rng.normal(); })};
  const MatrixXd cp = path.control_points();
  for (int j = 0; j < knots; ++j) {
    const double s = static_cast<double>(j + 1) / (knots + 1);
    const auto pt = spline_eval(path, basis, s);
    CHECK((pt.q - cp.col(j + 1)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("quadrature weight tables agree with pointwise evaluation") {
  Rng rng(48);
  NaturalSplineBasis basis(7);
  const int m = 9;
  const MatrixXd wv = basis.quadrature_value_weights(m);
  const MatrixXd wd = basis.quadrature_derivative_weights(m);
  const VectorXd nodes = NaturalSplineBasis::quadrature_nodes(m);
  REQUIRE(wv.rows() == m);
  REQUIRE(wv.cols() == basis.control_count());

  SplinePath path{VectorXd::Zero(1), VectorXd::Ones(1),
                  MatrixXd::NullaryExpr(1, 7, [&] { return rng.normal(); })};
  const MatrixXd cp = path.control_points();
  for (int i = 0; i < m; ++i) {
    CHECK(nodes[i] == doctest::Approx((i + 0.5) / m).epsilon(1e-14));
    const auto pt = spline_eval(path, basis, nodes[i]);
    CHECK((wv.row(i) * cp.transpose())(0, 0) == doctest::Approx(pt.q[0]).epsilon(1e-12));
    CHECK((wd.row(i) * cp.transpose())(0, 0) ==
          doctest::Approx(pt.qdot[0]).epsilon(1e-12));
  }
}

// ==== action =================================================================

namespace {

struct ActionRig {
  NaturalSplineBasis basis{15};
  std::optional<MetricField> metric;
  std::shared_ptr<NwEstimator> kde;
  Potential potential;

  Lagrangian lag() const {
    return {metric ? &*metric : nullptr, potential.active() ? &potential : nullptr};
  }
};

ActionRig flat_rig() { return {}; }

ActionRig full_rig(Rng& rng) {
  ActionRig rig;
  rig.metric = random_metric(2, 0, true, rng);
  const MatrixXd pts = MatrixXd::NullaryExpr(2, 30, [&] { return rng.normal(); });
  rig.kde = std::make_shared<NwEstimator>(pts, 0.4);
  rig.potential = Potential(rig.kde, 0.05);
  return rig;
}

}  // namespace

TEST_CASE("straight constant-speed path under identity metric is half squared length") {
  ActionRig rig = flat_rig();
  for (int m : {2, 16, 32}) {
    ActionEvaluator eval(rig.lag(), rig.basis, m);
    MatrixXd y0(2, 2), y1(2, 2);
    y0 << 0.0, -1.0, 0.0, 2.0;
    y1 << 3.0, 1.0, 4.0, 2.5;
    const MatrixXd offsets = MatrixXd::Zero(2 * 15, 2);
    const GeometryBatch geo = make_geometry_batch(
        rig.lag(), std::vector<Condition>(2, Condition::discrete(0)), nullptr);
    const auto res = eval.evaluate(y0, y1, offsets, geo, {});
    for (int j = 0; j < 2; ++j) {
      CHECK(res.action[j] ==
            doctest::Approx(0.5 * (y1.col(j) - y0.col(j)).squaredNorm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant potential shifts the action by its value") {
  // A pool far away yields density ~0, so u = alpha log(eps) everywhere.
  ActionRig rig;
  rig.kde = std::make_shared<NwEstimator>(MatrixXd::Constant(2, 1, 500.0), 0.05);
  rig.potential = Potential(rig.kde, 0.05, 1e-9);
  ActionEvaluator eval(rig.lag(), rig.basis, 32);

  VectorXd y0 = VectorXd::Zero(2), y1 = VectorXd::Ones(2);
  const GeometryBatch geo =
      make_geometry_batch(rig.lag(), Condition::discrete(0), nullptr);
  const double got = eval.value1({y0, y1, MatrixXd::Zero(2, 15)}, geo);
  const double expect = 0.5 * (y1 - y0).squaredNorm() - 0.05 * std::log(1e-9);
  CHECK(got == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("action gradients match finite differences") {
  Rng rng(49);
  ActionRig rig = full_rig(rng);
  ActionEvaluator eval(rig.lag(), rig.basis, 8);

  const int n = 3;
  MatrixXd y0 = MatrixXd::NullaryExpr(2, n, [&] { return rng.normal(); });
  MatrixXd y1 = MatrixXd::NullaryExpr(2, n, [&] { return rng.normal(); });
  MatrixXd offsets = MatrixXd::NullaryExpr(2 * 15, n, [&] { return 0.2 * rng.normal(); });
  const GeometryBatch geo = make_geometry_batch(
      rig.lag(), std::vector<Condition>(n, Condition::discrete(0)), nullptr);

  ActionEvaluator::Request req;
  req.endpoint_grads = true;
  req.offset_grads = true;
  ParamVector mg(rig.metric->net().layout());
  req.metric_param_grad = &mg;
  const auto res = eval.evaluate(y0, y1, offsets, geo, req);

  auto action_sum = [&]() {
    const auto r = eval.evaluate(y0, y1, offsets, geo, {});
    return r.action.sum();
  };

  auto check_block = [&](MatrixXd& block, const MatrixXd& analytic) {
    const VectorXd at = Eigen::Map<const VectorXd>(block.data(), block.size());
    const VectorXd a = Eigen::Map<const VectorXd>(analytic.data(), analytic.size());
    auto fn = [&](const VectorXd& x) {
      Eigen::Map<MatrixXd>(block.data(), block.rows(), block.cols()) =
          Eigen::Map<const MatrixXd>(x.data(), block.rows(), block.cols());
      const double f = action_sum();
      return f;
    };
    const auto rep = check_gradient(fn, at, a, 1e-5);
    Eigen::Map<MatrixXd>(block.data(), block.rows(), block.cols()) =
        Eigen::Map<const MatrixXd>(at.data(), block.rows(), block.cols());
    return rep.max_rel_error;
  };

  CHECK(check_block(y0, res.d_y0) <= 1e-3);
  CHECK(check_block(y1, res.d_y1) <= 1e-3);
  CHECK(check_block(offsets, res.d_offsets) <= 1e-3);

  // Metric parameters: analytic accumulation against finite differences on a
  // random subset.
  auto theta_fn = [&](const VectorXd& theta) {
    rig.metric->net().params().values() = theta;
    return action_sum();
  };
  const VectorXd theta0 = rig.metric->net().params().values();
  Rng probe_rng(50);
  const auto rep = check_gradient(theta_fn, theta0, mg.values(), 1e-5, 150, &probe_rng);
  rig.metric->net().params().values() = theta0;
  CHECK(rep.max_rel_error <= 1e-3);
}

TEST_CASE("param_scale scales the accumulated metric gradient") {
  Rng rng(51);
  ActionRig rig = full_rig(rng);
  ActionEvaluator eval(rig.lag(), rig.basis, 6);
  MatrixXd y0 = MatrixXd::NullaryExpr(2, 2, [&] { return rng.normal(); });
  MatrixXd y1 = MatrixXd::NullaryExpr(2, 2, [&] { return rng.normal(); });
  MatrixXd offsets = MatrixXd::Zero(2 * 15, 2);
  const GeometryBatch geo = make_geometry_batch(
      rig.lag(), std::vector<Condition>(2, Condition::discrete(0)), nullptr);

  ParamVector g1(rig.metric->net().layout()), g2(rig.metric->net().layout());
  ActionEvaluator::Request req;
  req.metric_param_grad = &g1;
  req.param_scale = 1.0;
  (void)eval.evaluate(y0, y1, offsets, geo, req);
  req.metric_param_grad = &g2;
  req.param_scale = -2.5;
  (void)eval.evaluate(y0, y1, offsets, geo, req);
  CHECK((g2.values() + 2.5 * g1.values()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("doubling quadrature moves a smooth action by under one percent") {
  Rng rng(52);
  ActionRig rig = full_rig(rng);
  SplinePath path{VectorXd::Zero(2), VectorXd::Ones(2),
                  MatrixXd::NullaryExpr(2, 15, [&] { return 0.3 * rng.normal(); })};
  const GeometryBatch geo =
      make_geometry_batch(rig.lag(), Condition::discrete(0), nullptr);

  const double a16 = ActionEvaluator(rig.lag(), rig.basis, 16).value1(path, geo);
  const double a32 = ActionEvaluator(rig.lag(), rig.basis, 32).value1(path, geo);
  const double a64 = ActionEvaluator(rig.lag(), rig.basis, 64).value1(path, geo);
  CHECK(std::abs(a16 - a64) <= 0.01 * std::abs(a64));
  CHECK(std::abs(a32 - a64) <= 0.005 * std::abs(a64));
}

// ==== geodesics ==============================================================

TEST_CASE("flat geodesic straightens to half squared distance") {
  ActionRig rig = flat_rig();
  ActionEvaluator eval(rig.lag(), rig.basis, 16);
  Rng rng(53);
  VectorXd y0(2), y1(2);
  y0 << -1.0, 0.5;
  y1 << 2.0, -1.0;
  const GeometryBatch geo =
      make_geometry_batch(rig.lag(), Condition::discrete(0), nullptr);

  // Start from a bent path; the minimizer must recover the segment.
  MatrixXd init = MatrixXd::NullaryExpr(2, 15, [&] { return 0.5 * rng.normal(); });
  LbfgsOptions solver;
  solver.max_iters = 50;
  const auto res = lagrangian_cost(eval, y0, y1, geo, init, solver);
  CHECK(res.action ==
        doctest::Approx(0.5 * (y1 - y0).squaredNorm()).epsilon(1e-4));
  CHECK(res.path.offsets.cwiseAbs().maxCoeff() <= 2e-2);
  CHECK(res.iters <= 50);
}

TEST_CASE("a density ridge lowers the achievable action") {
  // Kernel mass bridges the midpoint; the potential rewards passing through.
  Rng rng(54);
  MatrixXd ridge(2, 21);
  for (int i = 0; i < 21; ++i) {
    ridge.col(i) << 0.0, -1.0 + 0.1 * i;  // vertical ridge through the origin
  }
  ActionRig rig;
  rig.kde = std::make_shared<NwEstimator>(ridge, 0.2);
  rig.potential = Potential(rig.kde, 0.5);
  ActionEvaluator eval(rig.lag(), rig.basis, 32);

  VectorXd y0(2), y1(2);
  y0 << -1.0, 0.0;
  y1 << 1.0, 0.0;
  const GeometryBatch geo =
      make_geometry_batch(rig.lag(), Condition::discrete(0), nullptr);

  const double straight = eval.value1({y0, y1, MatrixXd::Zero(2, 15)}, geo);
  LbfgsOptions solver;
  solver.max_iters = 60;
  const auto res =
      lagrangian_cost(eval, y0, y1, geo, MatrixXd::Zero(2, 15), solver);
  CHECK(res.action < straight - 1e-4);
}

TEST_SUITE_END();
