#include "clot/metrics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "clot/assignment.hpp"

namespace clot {

namespace {

// C(i, j) = ||a_i - b_j||^2 via one GEMM.
MatrixXd squared_distances(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd c = (-2.0) * (a.transpose() * b);
  const VectorXd an = a.colwise().squaredNorm();
  const VectorXd bn = b.colwise().squaredNorm();
  c.colwise() += an;
  c.rowwise() += bn.transpose();
  return c.cwiseMax(0.0);
}

}  // namespace

double eval_nll(const MatrixXd& generated, const MatrixXd& truth, double bandwidth) {
  CLOT_VALIDATE(generated.cols() > 0 && truth.cols() > 0,
                "eval_nll: empty sample set");
  CLOT_VALIDATE(generated.rows() == truth.rows(),
                "eval_nll: dimension mismatch between sample sets");
  CLOT_VALIDATE(bandwidth > 0.0, "eval_nll: bandwidth must be positive");

  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const double log_prefactor =
      -0.5 * static_cast<double>(generated.rows()) *
      std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);
  // log-sum-exp per truth column keeps far-field values finite where the
  // plain kernel sum would underflow to zero.
  const MatrixXd e = -inv2h2 * squared_distances(generated, truth);
  double total = 0.0;
  for (Index j = 0; j < e.cols(); ++j) {
    const double top = e.col(j).maxCoeff();
    const double lse =
        top + std::log((e.col(j).array() - top).exp().sum());
    total += lse - std::log(static_cast<double>(generated.cols())) + log_prefactor;
  }
  return -total / static_cast<double>(truth.cols());
}

double circle_distance(const MatrixXd& samples, double center_x, double radius) {
  CLOT_VALIDATE(samples.rows() == 2, "circle_distance: 2-D samples required");
  CLOT_VALIDATE(samples.cols() > 0, "circle_distance: empty sample set");
  const auto dx = (samples.row(0).array() - center_x).eval();
  const auto dy = samples.row(1).array().eval();
  return ((dx.square() + dy.square()).sqrt() - radius).abs().mean();
}

double eval_cd(const MatrixXd& samples, int condition_id) {
  CLOT_VALIDATE(condition_id >= 1 && condition_id <= 4,
                "eval_cd: condition id must be 1..4");
  const double cx = condition_id <= 2 ? -1.0 : 1.0;
  return circle_distance(samples, cx, 1.0);
}

double eval_w2(const MatrixXd& a, const MatrixXd& b) {
  CLOT_VALIDATE(a.cols() == b.cols(), "eval_w2: sample counts differ");
  CLOT_VALIDATE(a.rows() == b.rows(), "eval_w2: dimensions differ");
  CLOT_VALIDATE(a.cols() > 0, "eval_w2: empty sample set");
  CLOT_VALIDATE(a.cols() <= 2000, "eval_w2: exact assignment capped at 2000 points");
  const auto res = solve_assignment(squared_distances(a, b));
  return std::sqrt(std::max(0.0, res.cost / static_cast<double>(a.cols())));
}

double energy_distance(const MatrixXd& a, const MatrixXd& b) {
  CLOT_VALIDATE(a.rows() == b.rows(), "energy_distance: dimensions differ");
  CLOT_VALIDATE(a.cols() > 0 && b.cols() > 0, "energy_distance: empty sample set");
  const double ab = squared_distances(a, b).cwiseSqrt().mean();
  const double aa = squared_distances(a, a).cwiseSqrt().mean();
  const double bb = squared_distances(b, b).cwiseSqrt().mean();
  return 2.0 * ab - aa - bb;
}

EnergyTestResult energy_distance_test(const MatrixXd& a, const MatrixXd& b,
                                      int permutations, Rng& rng) {
  CLOT_VALIDATE(permutations > 0, "energy_distance_test: permutations must be positive");
  const Index n = a.cols();
  const Index m = b.cols();
  CLOT_VALIDATE(n > 1 && m > 1, "energy_distance_test: need at least two samples per set");
  CLOT_VALIDATE(a.rows() == b.rows(), "energy_distance_test: dimensions differ");

  MatrixXd pool(a.rows(), n + m);
  pool.leftCols(n) = a;
  pool.rightCols(m) = b;
  const MatrixXd dist = squared_distances(pool, pool).cwiseSqrt();

  auto statistic = [&](const std::vector<int>& idx) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (Index i = 0; i < n; ++i) {
      const int ii = idx[static_cast<std::size_t>(i)];
      for (Index j = 0; j < n; ++j) aa += dist(ii, idx[static_cast<std::size_t>(j)]);
      for (Index j = 0; j < m; ++j) {
        ab += dist(ii, idx[static_cast<std::size_t>(n + j)]);
      }
    }
    for (Index i = 0; i < m; ++i) {
      const int ii = idx[static_cast<std::size_t>(n + i)];
      for (Index j = 0; j < m; ++j) bb += dist(ii, idx[static_cast<std::size_t>(n + j)]);
    }
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 2.0 * ab / (dn * dm) - aa / (dn * dn) - bb / (dm * dm);
  };

  std::vector<int> idx(static_cast<std::size_t>(n + m));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  EnergyTestResult out;
  out.statistic = statistic(idx);
  out.permutations = permutations;
  int at_least = 0;
  for (int r = 0; r < permutations; ++r) {
    if (statistic(rng.permutation(static_cast<int>(n + m))) >= out.statistic) {
      ++at_least;
    }
  }
  out.p_value = (1.0 + at_least) / (1.0 + permutations);
  return out;
}

}  // namespace clot
