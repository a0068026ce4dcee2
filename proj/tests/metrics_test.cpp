#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clot/assignment.hpp"
#include "clot/metrics.hpp"
#include "clot/rng.hpp"

using namespace clot;

TEST_SUITE_BEGIN("metrics");

namespace {

constexpr double kPi = 3.14159265358979323846;

double brute_force_assignment(const MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

MatrixXd cloud(int n, double cx, double cy, double spread, Rng& rng) {
  MatrixXd m(2, n);
  for (int i = 0; i < n; ++i) {
    m.col(i) << cx + spread * rng.normal(), cy + spread * rng.normal();
  }
  return m;
}

}  // namespace

// ==== assignment =============================================================

TEST_CASE("assignment matches exhaustive permutation search") {
  Rng rng(71);
  for (int n : {1, 2, 3, 5, 7}) {
    for (int trial = 0; trial < 8; ++trial) {
      const MatrixXd cost = MatrixXd::NullaryExpr(n, n, [&] { return rng.normal(); });
      const auto res = solve_assignment(cost);
      CHECK(res.cost == doctest::Approx(brute_force_assignment(cost)).epsilon(1e-9));

      // The reported matching is a permutation achieving the reported cost.
      std::vector<int> seen(static_cast<std::size_t>(n), 0);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const int j = res.col_of_row[static_cast<std::size_t>(i)];
        REQUIRE(j >= 0);
        REQUIRE(j < n);
        ++seen[static_cast<std::size_t>(j)];
        acc += cost(i, j);
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      CHECK(acc == doctest::Approx(res.cost).epsilon(1e-12));
    }
  }
}

TEST_CASE("assignment picks the off-diagonal when it is cheaper") {
  MatrixXd cost(2, 2);
  cost << 10.0, 1.0, 2.0, 10.0;
  const auto res = solve_assignment(cost);
  CHECK(res.cost == doctest::Approx(3.0));
  CHECK(res.col_of_row[0] == 1);
  CHECK(res.col_of_row[1] == 0);
}

// ==== wasserstein ============================================================

TEST_CASE("w2 metric axioms on random clouds") {
  Rng rng(72);
  const MatrixXd a = cloud(12, 0.0, 0.0, 1.0, rng);
  const MatrixXd b = cloud(12, 1.5, -0.5, 0.7, rng);
  const MatrixXd c = cloud(12, -1.0, 2.0, 1.2, rng);

  CHECK(eval_w2(a, a) <= 1e-12);
  CHECK(eval_w2(a, b) == doctest::Approx(eval_w2(b, a)).epsilon(1e-9));
  CHECK(eval_w2(a, b) > 0.0);
  CHECK(eval_w2(a, c) <= eval_w2(a, b) + eval_w2(b, c) + 1e-9);
}

TEST_CASE("w2 of a pure translation is the shift length") {
  Rng rng(73);
  const MatrixXd a = cloud(20, 0.0, 0.0, 1.0, rng);
  VectorXd v(2);
  v << 0.6, -0.8;  // length 1
  const MatrixXd b = a.colwise() + v;
  CHECK(eval_w2(a, b) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("three-point w2 equals hand enumeration") {
  MatrixXd a(2, 3), b(2, 3);
  a << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  b << 2.0, 0.0, 3.0, 0.0, 2.0, 1.0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> perm{0, 1, 2};
  do {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      acc += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).squaredNorm();
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(eval_w2(a, b) == doctest::Approx(std::sqrt(best / 3.0)).epsilon(1e-9));
}

// ==== nll ====================================================================

TEST_CASE("nll against a single kernel center is the explicit gaussian") {
  MatrixXd gen(2, 1);
  gen << 0.25, -0.5;
  MatrixXd truth(2, 3);
  truth << 0.25, 1.25, 0.25, -0.5, -0.5, 0.5;
  const double h = 0.2;

  double expect = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double d2 = (truth.col(j) - gen.col(0)).squaredNorm();
    expect += -std::log(std::exp(-d2 / (2.0 * h * h)) / (2.0 * kPi * h * h));
  }
  expect /= 3.0;
  CHECK(eval_nll(gen, truth, h) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("nll grows as truth drifts from the generated mass") {
  Rng rng(74);
  const MatrixXd gen = cloud(50, 0.0, 0.0, 0.3, rng);
  double prev = -std::numeric_limits<double>::infinity();
  for (double shift : {0.0, 1.0, 2.0, 4.0}) {
    const MatrixXd truth = cloud(50, shift, 0.0, 0.3, rng);
    const double nll = eval_nll(gen, truth, 0.05);
    CHECK(std::isfinite(nll));
    CHECK(nll > prev);
    prev = nll;
  }
}

TEST_CASE("nll stays finite at extreme separations") {
  MatrixXd gen(2, 2), truth(2, 2);
  gen << 0.0, 1.0, 0.0, 0.0;
  truth << 500.0, 501.0, 500.0, 500.0;
  const double nll = eval_nll(gen, truth, 0.05);
  CHECK(std::isfinite(nll));
  CHECK(nll > 1e4);  // enormous but representable via log-sum-exp
}

// ==== circle distance ========================================================

TEST_CASE("circle distance measures mean radial deviation") {
  MatrixXd pts(2, 3);
  pts << 2.0, 0.0, 0.0, 0.0, 1.3, -0.6;  // radii from (0,0): 2, 1.3, 0.6
  CHECK(circle_distance(pts, 0.0, 1.0) ==
        doctest::Approx((1.0 + 0.3 + 0.4) / 3.0).epsilon(1e-12));
}

TEST_CASE("on-circle samples score zero for their own condition") {
  Rng rng(75);
  for (int cond : {1, 2, 3, 4}) {
    const double cx = cond <= 2 ? -1.0 : 1.0;
    MatrixXd pts(2, 40);
    for (int i = 0; i < 40; ++i) {
      const double a = rng.uniform(0.0, kPi);
      pts.col(i) << cx + std::cos(a), std::sin(a);
    }
    CHECK(eval_cd(pts, cond) <= 1e-12);
    CHECK(eval_cd(pts.colwise() + Eigen::Vector2d(0.0, 0.05), cond) > 1e-3);
  }
}

TEST_CASE("mirrored samples swap center signs across the condition families") {
  Rng rng(76);
  MatrixXd pts(2, 30);
  for (int i = 0; i < 30; ++i) {
    pts.col(i) << -1.0 + 1.1 * std::cos(i * 0.1), 1.1 * std::sin(i * 0.1);
  }
  MatrixXd mirrored = pts;
  mirrored.row(0) *= -1.0;  // reflect through the vertical axis
  CHECK(eval_cd(pts, 1) == doctest::Approx(eval_cd(mirrored, 3)).epsilon(1e-12));
  CHECK(eval_cd(pts, 2) == doctest::Approx(eval_cd(mirrored, 4)).epsilon(1e-12));
}

// ==== energy distance ========================================================

TEST_CASE("energy distance vanishes on identical samples and ranks separation") {
  Rng rng(77);
  const MatrixXd a = cloud(40, 0.0, 0.0, 1.0, rng);
  CHECK(energy_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));

  const MatrixXd near = cloud(40, 0.5, 0.0, 1.0, rng);
  const MatrixXd far = cloud(40, 3.0, 0.0, 1.0, rng);
  const double e_near = energy_distance(a, near);
  const double e_far = energy_distance(a, far);
  CHECK(e_near > 0.0);
  CHECK(e_far > 4.0 * e_near);
}

TEST_CASE("permutation test separates distinct distributions") {
  Rng rng(78);
  const MatrixXd a = cloud(100, 0.0, 0.0, 1.0, rng);
  const MatrixXd b = cloud(100, 3.0, 0.0, 1.0, rng);
  Rng test_rng(1);
  const auto res = energy_distance_test(a, b, 200, test_rng);
  CHECK(res.p_value < 0.01);
  CHECK(res.distinguishable(0.01));
  CHECK(res.permutations == 200);
}

TEST_CASE("permutation test accepts same-distribution splits") {
  Rng rng(79);
  const MatrixXd a = cloud(100, 0.0, 0.0, 1.0, rng);
  const MatrixXd b = cloud(100, 0.0, 0.0, 1.0, rng);
  Rng test_rng(2);
  const auto res = energy_distance_test(a, b, 200, test_rng);
  CHECK(res.p_value >= 0.05);
  CHECK(!res.distinguishable(0.01));
}

TEST_SUITE_END();
