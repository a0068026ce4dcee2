#include "clot/sampling.hpp"

#include <cmath>

namespace clot {
namespace {

constexpr double kTimeTol = 1e-9;

}

SurrogateModel::SurrogateModel(std::unique_ptr<TransportBundle> bundle,
                               std::shared_ptr<const ObservationSet> anchors)
    : bundle_(std::move(bundle)), anchors_(std::move(anchors)) {
  CLOT_REQUIRE(bundle_ != nullptr && anchors_ != nullptr,
               "SurrogateModel: null bundle or anchors");
  CLOT_REQUIRE(anchors_->finalized(), "SurrogateModel: anchors not finalized");
  CLOT_REQUIRE(static_cast<int>(bundle_->anchor_times().size()) ==
                   anchors_->anchor_count(),
               "SurrogateModel: bundle/anchor time mismatch");
}

std::pair<int, double> SurrogateModel::locate(double t) const {
  const auto& times = bundle_->anchor_times();
  const double lo = times.front();
  const double hi = times.back();
  if (!(std::isfinite(t)) || t < lo - kTimeTol || t > hi + kTimeTol) {
    throw validation_error("query time " + std::to_string(t) +
                           " outside the trained anchor span [" +
                           std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  t = std::min(std::max(t, lo), hi);
  // Interval k with t_k <= t < t_{k+1}; the right edge maps into the last
  // interval at fraction 1.
  int k = bundle_->interval_count() - 1;
  for (int i = 0; i + 1 < static_cast<int>(times.size()); ++i) {
    if (t < times[static_cast<std::size_t>(i + 1)] - kTimeTol) {
      k = i;
      break;
    }
  }
  const double t0 = times[static_cast<std::size_t>(k)];
  const double t1 = times[static_cast<std::size_t>(k + 1)];
  const double s = std::min(1.0, std::max(0.0, (t - t0) / (t1 - t0)));
  return {k, s};
}

MatrixXd SurrogateModel::sample_many(double t, const Condition& x, int count,
                                     Rng& rng) const {
  CLOT_REQUIRE(count > 0, "sample_many: count must be positive");
  const auto [k, s] = locate(t);
  const auto* group = anchors_->find_group(k, x);
  if (group == nullptr) {
    throw validation_error("no anchor samples for the requested condition");
  }
  const Index d = group->ys.rows();
  const Index pool = group->ys.cols();

  // Start points: uniform draws (with replacement) from the anchor samples.
  MatrixXd y0(d, count);
  for (int i = 0; i < count; ++i) {
    y0.col(i) = group->ys.col(static_cast<Index>(
        rng.uniform_index(static_cast<std::uint64_t>(pool))));
  }

  const MatrixXd encoded = bundle_->encoder().encode(x).replicate(1, count);
  const bool conditioned = bundle_->spline_gen().conditioned();
  MatrixXd y1, offsets;
  if (conditioned) {
    const FilmState film_t = bundle_->film_map(k, encoded);
    y1 = bundle_->predict_map(k, y0, film_t);
    const FilmState film_s = bundle_->film_spline(encoded);
    offsets = bundle_->predict_offsets(y0, y1, film_s);
  } else {
    y1 = bundle_->map(k).forward(y0);
    MatrixXd input(2 * d, count);
    input.topRows(d) = y0;
    input.bottomRows(d) = y1;
    offsets = bundle_->spline_gen().forward(input);
  }

  // Read the generated paths at fraction s: with control points linear in
  // (y0, y1, offsets) this is one weight row against each path's controls.
  const RowVectorXd w = bundle_->basis().value_weights(s);
  const int nc = bundle_->basis().control_count();
  MatrixXd out(d, count);
  out.setZero();
  for (int j = 0; j < nc; ++j) {
    const double sj = static_cast<double>(j) / static_cast<double>(nc - 1);
    out += w(j) * ((1.0 - sj) * y0 + sj * y1);
    if (j >= 1 && j + 1 < nc) {
      for (Index dd = 0; dd < d; ++dd) {
        out.row(dd) += w(j) * offsets.row(dd + d * (j - 1));
      }
    }
  }
  return out;
}

VectorXd SurrogateModel::sample(double t, const Condition& x, Rng& rng) const {
  return sample_many(t, x, 1, rng).col(0);
}

MatrixXd SurrogateModel::sample_many_raw(double lambda, const Condition& x,
                                         int count, Rng& rng) const {
  return sample_many(anchors_->time_map().to_unit(lambda), x, count, rng);
}

}  // namespace clot
