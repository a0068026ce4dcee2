#include <doctest.h>

#include <cmath>
#include <numeric>

#include "clot/film_mlp.hpp"
#include "clot/grad_check.hpp"
#include "clot/optim.hpp"
#include "clot/param_vector.hpp"
#include "clot/rng.hpp"

using namespace clot;

TEST_SUITE_BEGIN("diff_core");

// ==== parameter layout =======================================================

TEST_CASE("param vector views alias the flat storage") {
  auto layout = std::make_shared<ParamLayout>();
  const int a = layout->add("a", 2, 3);
  const int b = layout->add("b", 4, 1);
  CHECK(layout->total_size() == 10);
  CHECK(layout->index_of("b") == b);
  CHECK_THROWS_AS((void)layout->index_of("missing"), contract_error);
  CHECK_THROWS_AS((void)layout->add("a", 1, 1), contract_error);

  ParamVector p(layout);
  p.values().setLinSpaced(10, 0.0, 9.0);
  CHECK(p.matrix(a)(0, 0) == 0.0);
  CHECK(p.matrix(a)(1, 2) == 5.0);  // column-major within the segment
  CHECK(p.matrix("b")(0, 0) == 6.0);

  p.matrix("b")(3, 0) = -2.5;
  CHECK(p.values()[9] == -2.5);  // write-through: views are maps, not copies
}

// ==== mlp gradients ==========================================================

namespace {

// Scalar objective over all outputs of a conditioned forward pass; exercises
// weights, biases, the FiLM embedder, inputs, and condition vectors at once.
struct MlpProbe {
  FilmMlp net;
  MatrixXd input;
  MatrixXd cond;
  MatrixXd weight;  // fixed random mixing of the output matrix

  double value() const {
    const MatrixXd out = net.conditioned() ? net.forward_cond(input, cond)
                                           : net.forward(input);
    return (out.array() * weight.array()).sum();
  }

  // d value / d theta, d value / d input, d value / d cond.
  void grads(VectorXd* d_theta, MatrixXd* d_input, MatrixXd* d_cond) {
    MlpCache cache;
    ParamVector pg(net.layout());
    MatrixXd ig;
    if (net.conditioned()) {
      const FilmState film = net.film(cond);
      FilmCotangents fcot;
      (void)net.forward(input, &film, 1, &cache);
      net.backward(weight, cache, &film, &pg, &ig, &fcot);
      MatrixXd cg;
      net.film_backward(fcot, cond, film, &pg, &cg);
      if (d_cond) *d_cond = cg;
    } else {
      (void)net.forward(input, nullptr, 1, &cache);
      net.backward(weight, cache, nullptr, &pg, &ig, nullptr);
    }
    if (d_theta) *d_theta = pg.values();
    if (d_input) *d_input = ig;
  }
};

MlpProbe make_probe(Activation act, bool conditioned, Rng& rng) {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.output_dim = 2;
  cfg.hidden = {8, 6};
  cfg.activation = act;
  cfg.condition_dim = conditioned ? 4 : 0;
  cfg.film_width = 5;

  MlpProbe probe;
  probe.net = FilmMlp(cfg);
  probe.net.init(rng);
  const int n = 7;
  probe.input = MatrixXd::NullaryExpr(3, n, [&] { return rng.normal(); });
  probe.cond = MatrixXd::NullaryExpr(4, n, [&] { return 0.5 * rng.normal(); });
  probe.weight = MatrixXd::NullaryExpr(2, n, [&] { return rng.normal(); });
  return probe;
}

}  // namespace

TEST_CASE("mlp parameter gradients match finite differences") {
  Rng rng(11);
  for (Activation act :
       {Activation::kRelu, Activation::kSwish, Activation::kSelu, Activation::kTanh}) {
    for (bool conditioned : {false, true}) {
      CAPTURE(activation_name(act));
      CAPTURE(conditioned);
      MlpProbe probe = make_probe(act, conditioned, rng);

      VectorXd analytic;
      probe.grads(&analytic, nullptr, nullptr);

      auto fn = [&](const VectorXd& theta) {
        probe.net.params().values() = theta;
        return probe.value();
      };
      const VectorXd at = probe.net.params().values();
      Rng probe_rng(17);
      const auto report =
          check_gradient(fn, at, analytic, 1e-5, 120, &probe_rng);
      probe.net.params().values() = at;
      CHECK(report.coordinates_checked >= 100);
      CHECK(report.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("mlp input and condition gradients match finite differences") {
  Rng rng(12);
  MlpProbe probe = make_probe(Activation::kSwish, true, rng);

  MatrixXd d_input, d_cond;
  probe.grads(nullptr, &d_input, &d_cond);

  auto input_fn = [&](const VectorXd& flat) {
    MlpProbe local = probe;
    local.input = Eigen::Map<const MatrixXd>(flat.data(), probe.input.rows(),
                                             probe.input.cols());
    return local.value();
  };
  const VectorXd in_flat =
      Eigen::Map<const VectorXd>(probe.input.data(), probe.input.size());
  const VectorXd d_in_flat = Eigen::Map<const VectorXd>(d_input.data(), d_input.size());
  CHECK(check_gradient(input_fn, in_flat, d_in_flat, 1e-6).max_rel_error <= 1e-4);

  auto cond_fn = [&](const VectorXd& flat) {
    MlpProbe local = probe;
    local.cond = Eigen::Map<const MatrixXd>(flat.data(), probe.cond.rows(),
                                            probe.cond.cols());
    return local.value();
  };
  const VectorXd c_flat =
      Eigen::Map<const VectorXd>(probe.cond.data(), probe.cond.size());
  const VectorXd d_c_flat = Eigen::Map<const VectorXd>(d_cond.data(), d_cond.size());
  CHECK(check_gradient(cond_fn, c_flat, d_c_flat, 1e-6).max_rel_error <= 1e-4);
}

TEST_CASE("film replicas reuse one modulator column per block") {
  Rng rng(13);
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.output_dim = 3;
  cfg.hidden = {6};
  cfg.condition_dim = 2;
  FilmMlp net(cfg);
  net.init(rng);

  const int conds_n = 3, reps = 4;
  const MatrixXd cond = MatrixXd::NullaryExpr(2, conds_n, [&] { return rng.normal(); });
  const MatrixXd input =
      MatrixXd::NullaryExpr(2, conds_n * reps, [&] { return rng.normal(); });

  const FilmState film = net.film(cond);
  const MatrixXd fast = net.forward(input, &film, reps);

  // Reference: expand the condition matrix so each input column gets its own.
  MatrixXd cond_full(2, conds_n * reps);
  for (int i = 0; i < conds_n; ++i)
    for (int r = 0; r < reps; ++r) cond_full.col(i * reps + r) = cond.col(i);
  const MatrixXd slow = net.forward_cond(input, cond_full);
  CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("zero-initialized film embedder output starts at identity modulation") {
  Rng rng(14);
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.output_dim = 2;
  cfg.hidden = {5};
  cfg.condition_dim = 3;
  FilmMlp net(cfg);
  net.init(rng);

  const MatrixXd cond = MatrixXd::NullaryExpr(3, 4, [&] { return rng.normal(); });
  const FilmState film = net.film(cond);
  CHECK(film.dgamma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(film.beta.cwiseAbs().maxCoeff() == 0.0);

  const MatrixXd input = MatrixXd::NullaryExpr(2, 4, [&] { return rng.normal(); });
  const MatrixXd with = net.forward(input, &film, 1);
  const MatrixXd without = net.forward(input);
  CHECK((with - without).cwiseAbs().maxCoeff() == 0.0);
}

// ==== adam ===================================================================

TEST_CASE("adam first step matches the closed-form recurrence") {
  AdamOptions opts;
  opts.lr = 0.1;
  VectorXd x(2);
  x << 1.0, -2.0;
  VectorXd g(2);
  g << 0.5, -0.25;

  AdamState st;
  st.reset(2);
  adam_step(x, g, st, opts);

  // After one step the bias-corrected moments are exactly g and g^2, so the
  // update is lr * g / (|g| + eps) elementwise.
  for (int i = 0; i < 2; ++i) {
    const double expect =
        (i == 0 ? 1.0 : -2.0) - opts.lr * g[i] / (std::abs(g[i]) + opts.eps);
    CHECK(x[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(st.step == 1);

  // ParamVector overload walks the same state forward.
  auto layout = std::make_shared<ParamLayout>();
  layout->add("w", 2, 1);
  ParamVector p(layout);
  p.values() << 1.0, -2.0;
  AdamState st2;
  st2.reset(2);
  adam_step(p, g, st2, opts);
  CHECK((p.values() - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam rejects non-finite gradients") {
  AdamOptions opts;
  VectorXd x = VectorXd::Zero(2);
  VectorXd g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  st.reset(2);
  CHECK_THROWS_AS(adam_step(x, g, st, opts), numeric_error);
}

// ==== l-bfgs =================================================================

namespace {

// f(x) = 1/2 (x - c)^T A (x - c) with SPD A; minimum c, value 0.
struct Quadratic {
  MatrixXd a;
  VectorXd c;

  double operator()(const VectorXd& x, VectorXd* grad) const {
    const VectorXd r = x - c;
    const VectorXd ar = a * r;
    if (grad) *grad = ar;
    return 0.5 * r.dot(ar);
  }
};

Quadratic random_quadratic(int n, Rng& rng) {
  MatrixXd m = MatrixXd::NullaryExpr(n, n, [&] { return rng.normal(); });
  Quadratic q;
  q.a = m.transpose() * m + 0.5 * MatrixXd::Identity(n, n);
  q.c = VectorXd::NullaryExpr(n, [&] { return rng.normal(); });
  return q;
}

}  // namespace

TEST_CASE("lbfgs minimizes random quadratics to their known optimum") {
  Rng rng(21);
  LbfgsOptions opts;
  opts.max_iters = 60;
  for (int trial = 0; trial < 5; ++trial) {
    const Quadratic q = random_quadratic(4, rng);
    const VectorXd x0 = VectorXd::NullaryExpr(4, [&] { return 2.0 * rng.normal(); });
    const auto res = lbfgs_minimize(
        [&](const VectorXd& x, VectorXd* g) { return q(x, g); }, x0, opts);
    CHECK((res.x - q.c).norm() <= 1e-5);
    CHECK(res.f <= 1e-8);
    CHECK(res.converged);
  }
}

TEST_CASE("lbfgs never returns worse than its starting point") {
  // A stiff, non-convex objective with narrow curved valleys.
  auto rosenbrock = [](const VectorXd& x, VectorXd* g) {
    const double a = x[1] - x[0] * x[0];
    const double b = 1.0 - x[0];
    if (g) {
      (*g)[0] = -400.0 * a * x[0] - 2.0 * b;
      (*g)[1] = 200.0 * a;
    }
    return 100.0 * a * a + b * b;
  };
  Rng rng(22);
  LbfgsOptions opts;
  opts.max_iters = 15;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd x0(2);
    x0 << rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 3.0);
    VectorXd unused(2);
    const double f0 = rosenbrock(x0, &unused);
    const auto res = lbfgs_minimize(rosenbrock, x0, opts);
    CHECK(res.f <= f0);
  }
}

TEST_CASE("lbfgs with a zero iteration budget returns the start point") {
  const Quadratic q{MatrixXd::Identity(3, 3), VectorXd::Ones(3)};
  const VectorXd x0 = VectorXd::Zero(3);
  LbfgsOptions opts;
  opts.max_iters = 0;
  const auto res = lbfgs_minimize(
      [&](const VectorXd& x, VectorXd* g) { return q(x, g); }, x0, opts);
  CHECK(res.x == x0);
  CHECK(res.f == doctest::Approx(1.5));
  CHECK(res.iters == 0);
}

TEST_CASE("lbfgs survives an unsatisfiable line search") {
  // Gradient deliberately points away from descent: every Armijo trial fails.
  auto adversarial = [](const VectorXd& x, VectorXd* g) {
    if (g) (*g)[0] = -1.0;  // claims descent direction +1 while f increases
    return x[0];
  };
  VectorXd x0(1);
  x0 << 0.0;
  LbfgsOptions opts;
  opts.max_iters = 5;
  const auto res = lbfgs_minimize(adversarial, x0, opts);
  CHECK(res.f == 0.0);
  CHECK(res.x[0] == 0.0);
}

namespace {

struct QuadraticBatch : BatchedObjective {
  std::vector<Quadratic> qs;
  int rounds = 0;

  Index dim() const override { return qs.front().c.size(); }
  void evaluate(const MatrixXd& x, const std::vector<int>& idx, VectorXd& f,
                MatrixXd* grad) override {
    ++rounds;
    for (Index j = 0; j < x.cols(); ++j) {
      VectorXd g;
      f[j] = qs[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])](
          x.col(j), grad ? &g : nullptr);
      if (grad) grad->col(j) = g;
    }
  }
};

}  // namespace

TEST_CASE("batched lbfgs matches per-sample scalar runs") {
  Rng rng(23);
  const int n = 12, d = 3;
  QuadraticBatch batch;
  MatrixXd x0(d, n);
  for (int i = 0; i < n; ++i) {
    batch.qs.push_back(random_quadratic(d, rng));
    x0.col(i) = VectorXd::NullaryExpr(d, [&] { return rng.normal(); });
  }

  LbfgsOptions opts;
  opts.max_iters = 40;
  const auto res = lbfgs_minimize_batch(batch, x0, opts);
  CHECK(res.converged == n);
  for (int i = 0; i < n; ++i) {
    const auto scalar = lbfgs_minimize(
        [&](const VectorXd& x, VectorXd* g) { return batch.qs[static_cast<std::size_t>(i)](x, g); },
        x0.col(i), opts);
    CHECK((res.x.col(i) - scalar.x).norm() <= 1e-6);
    CHECK(res.f[i] == doctest::Approx(scalar.f).epsilon(1e-8));
  }
  // Lockstep batching: far fewer objective rounds than total scalar evals.
  CHECK(res.eval_rounds == batch.rounds);
}

// ==== gradient checker =======================================================

TEST_CASE("check_gradient flags a wrong analytic gradient") {
  auto fn = [](const VectorXd& x) { return x.squaredNorm(); };
  VectorXd at(3);
  at << 1.0, -2.0, 0.5;
  const VectorXd right = 2.0 * at;
  CHECK(check_gradient(fn, at, right).max_rel_error <= 1e-7);

  VectorXd wrong = right;
  wrong[1] += 0.5;
  const auto bad = check_gradient(fn, at, wrong);
  CHECK(bad.max_rel_error >= 0.1);
  CHECK(bad.worst_coordinate == 1);
}

// ==== rng ====================================================================

TEST_CASE("identical seeds give identical streams, children diverge") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());

  Rng parent(99);
  Rng c0 = parent.child(0);
  Rng c1 = parent.child(1);
  int differing = 0;
  for (int i = 0; i < 64; ++i) differing += c0.raw() != c1.raw();
  CHECK(differing >= 60);  // adjacent tags must not correlate
}

TEST_CASE("uniform01 stays in range with matching moments") {
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - mean * mean == doctest::Approx(1.0 / 12.0).epsilon(0.03));
}

TEST_CASE("normal moments at bulk sample sizes") {
  Rng rng(6);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) <= 0.02);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("lognormal matches its closed-form mean") {
  Rng rng(7);
  const double mu = 0.0, sigma = 0.25;
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.lognormal(mu, sigma);
  CHECK(sum / n == doctest::Approx(std::exp(mu + 0.5 * sigma * sigma)).epsilon(0.02));
}

TEST_CASE("von mises circular mean and dispersion") {
  Rng rng(8);
  const double mean = 0.7, kappa = 5.0;
  const int n = 100000;
  double s = 0.0, c = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = rng.von_mises(mean, kappa);
    CHECK(a > mean - 3.1415926535897931 - 1e-12);
    CHECK(a <= mean + 3.1415926535897931 + 1e-12);
    s += std::sin(a);
    c += std::cos(a);
  }
  CHECK(std::abs(std::atan2(s, c) - mean) <= 0.02);
  // Mean resultant length R = I1(k)/I0(k); at kappa=5 about 0.8934.
  const double r = std::sqrt(s * s + c * c) / n;
  CHECK(r == doctest::Approx(0.8934).epsilon(0.01));

  // kappa = 0 degenerates to the uniform circle: tiny resultant.
  double s0 = 0.0, c0 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = rng.von_mises(0.0, 0.0);
    s0 += std::sin(a);
    c0 += std::cos(a);
  }
  CHECK(std::sqrt(s0 * s0 + c0 * c0) / n <= 0.02);
}

TEST_CASE("permutation covers the index range exactly once") {
  Rng rng(9);
  const auto perm = rng.permutation(50);
  std::vector<int> seen(50, 0);
  for (int v : perm) {
    REQUIRE(v >= 0);
    REQUIRE(v < 50);
    ++seen[static_cast<std::size_t>(v)];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int k) { return k == 1; }));

  // Fixedness proportion over many shuffles stays near 1/n.
  int fixed = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const auto p = rng.permutation(10);
    for (int i = 0; i < 10; ++i) fixed += p[static_cast<std::size_t>(i)] == i;
  }
  CHECK(fixed / static_cast<double>(trials) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("uniform_index respects its bound") {
  Rng rng(10);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_index(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(c >= 800);  // roughly uniform occupancy
}

TEST_SUITE_END();
