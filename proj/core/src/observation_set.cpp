#include "clot/observation_set.hpp"

#include <algorithm>
#include <cmath>

namespace clot {
namespace {

// Anchor times closer than this collapse to one anchor.
constexpr double kTimeTol = 1e-9;

}  // namespace

void ObservationSet::add(VectorXd y, Condition x, double t, int pair_key) {
  CLOT_REQUIRE(!finalized_, "ObservationSet::add after finalize");
  CLOT_VALIDATE(y.allFinite(), "observation with non-finite value");
  CLOT_VALIDATE(std::isfinite(t), "observation with non-finite time");
  if (records_.empty()) {
    dim_ = static_cast<int>(y.size());
    discrete_ = x.is_discrete();
    cond_dim_ = discrete_ ? 0 : static_cast<int>(x.vec().size());
  } else {
    CLOT_VALIDATE(y.size() == dim_, "observation dimension mismatch");
    CLOT_VALIDATE(x.is_discrete() == discrete_, "mixed condition modes in one dataset");
    if (!discrete_) {
      CLOT_VALIDATE(static_cast<int>(x.vec().size()) == cond_dim_,
                    "condition vector dimension mismatch");
    }
  }
  records_.push_back(Observation{std::move(y), std::move(x), t, pair_key});
}

void ObservationSet::finalize() {
  CLOT_REQUIRE(!finalized_, "ObservationSet::finalize called twice");
  CLOT_VALIDATE(!records_.empty(), "empty observation set");

  std::vector<double> times;
  times.reserve(records_.size());
  for (const auto& r : records_) times.push_back(r.t);
  std::sort(times.begin(), times.end());
  anchors_.clear();
  for (double t : times) {
    if (anchors_.empty() || t - anchors_.back() > kTimeTol) anchors_.push_back(t);
  }

  for (const auto& r : records_) {
    if (condition_index_.emplace(r.x, 0).second) conditions_.push_back(r.x);
  }
  std::sort(conditions_.begin(), conditions_.end());
  for (std::size_t i = 0; i < conditions_.size(); ++i) {
    condition_index_[conditions_[i]] = static_cast<int>(i);
  }

  // Group rows by (anchor, condition), anchor-major then condition order.
  std::map<std::pair<int, int>, std::vector<Index>> buckets;
  for (Index i = 0; i < size(); ++i) {
    const auto& r = records_[static_cast<std::size_t>(i)];
    const auto it = std::lower_bound(anchors_.begin(), anchors_.end(), r.t - kTimeTol);
    const int anchor = static_cast<int>(it - anchors_.begin());
    buckets[{anchor, condition_index_.at(r.x)}].push_back(i);
  }
  groups_.clear();
  groups_.reserve(buckets.size());
  for (const auto& [key, rows] : buckets) {
    Group g;
    g.anchor = key.first;
    g.x = conditions_[static_cast<std::size_t>(key.second)];
    g.rows = rows;
    g.ys.resize(dim_, static_cast<Index>(rows.size()));
    g.pair_keys.reserve(rows.size());
    for (std::size_t c = 0; c < rows.size(); ++c) {
      const auto& r = records_[static_cast<std::size_t>(rows[c])];
      g.ys.col(static_cast<Index>(c)) = r.y;
      g.pair_keys.push_back(r.pair_key);
    }
    groups_.push_back(std::move(g));
  }
  finalized_ = true;
}

const std::vector<ObservationSet::Group>& ObservationSet::groups() const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  return groups_;
}

std::vector<const ObservationSet::Group*> ObservationSet::groups_at(int anchor) const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  CLOT_REQUIRE(anchor >= 0 && anchor < anchor_count(), "anchor index out of range");
  std::vector<const Group*> out;
  for (const auto& g : groups_) {
    if (g.anchor == anchor) out.push_back(&g);
  }
  return out;
}

const ObservationSet::Group* ObservationSet::find_group(int anchor,
                                                        const Condition& x) const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  for (const auto& g : groups_) {
    if (g.anchor == anchor && g.x == x) return &g;
  }
  return nullptr;
}

const std::vector<Condition>& ObservationSet::conditions() const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  return conditions_;
}

ConditionEncoder ObservationSet::make_encoder() const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  if (discrete_) {
    std::vector<int> ids;
    ids.reserve(conditions_.size());
    for (const auto& c : conditions_) ids.push_back(c.id());
    return ConditionEncoder::for_discrete(std::move(ids));
  }
  return ConditionEncoder::for_continuous(cond_dim_);
}

std::vector<std::pair<Index, Index>> ObservationSet::matched_pairs(int interval) const {
  CLOT_REQUIRE(finalized_, "ObservationSet: finalize() required");
  CLOT_REQUIRE(interval >= 0 && interval < interval_count(), "interval out of range");
  std::vector<std::pair<Index, Index>> out;
  for (const auto& g0 : groups_) {
    if (g0.anchor != interval) continue;
    const Group* g1 = find_group(interval + 1, g0.x);
    if (g1 == nullptr) continue;
    for (std::size_t a = 0; a < g0.rows.size(); ++a) {
      const int key = g0.pair_keys[a];
      if (key < 0) continue;
      for (std::size_t b = 0; b < g1->rows.size(); ++b) {
        if (g1->pair_keys[b] == key) {
          out.emplace_back(g0.rows[a], g1->rows[b]);
        }
      }
    }
  }
  return out;
}

}  // namespace clot
