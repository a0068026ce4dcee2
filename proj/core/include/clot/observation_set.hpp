#pragma once

#include <map>
#include <optional>
#include <vector>

#include "clot/condition.hpp"

namespace clot {

/// Affine map between raw progression values and normalized time in [0, 1].
struct TimeMap {
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  bool identity = true;

  double to_unit(double lambda) const {
    if (identity) return lambda;
    return (lambda - lambda_min) / (lambda_max - lambda_min);
  }
  double to_raw(double t) const {
    if (identity) return t;
    return lambda_min + t * (lambda_max - lambda_min);
  }
};

struct Observation {
  VectorXd y;
  Condition x;
  double t = 0.0;     // normalized time
  int pair_key = -1;  // links matched records across anchors; -1 = unpaired
};

/// Sparse longitudinal sample: observations grouped by (anchor time,
/// condition).  Anchor times are the sorted distinct observation times;
/// within-anchor groups cache their samples as matrix columns.
class ObservationSet {
 public:
  struct Group {
    int anchor = 0;
    Condition x;
    MatrixXd ys;                  // dim x count
    std::vector<Index> rows;      // indices into records()
    std::vector<int> pair_keys;   // aligned with columns; -1 entries = unpaired
  };

  void add(VectorXd y, Condition x, double t, int pair_key = -1);

  /// Groups records, derives anchor times, and validates consistency.  Must be
  /// called after the last add() and before any query below.
  void finalize();
  bool finalized() const { return finalized_; }

  Index size() const { return static_cast<Index>(records_.size()); }
  bool empty() const { return records_.empty(); }
  int dim() const { return dim_; }
  bool discrete_conditions() const { return discrete_; }
  int condition_dim() const { return cond_dim_; }

  const Observation& record(Index i) const { return records_.at(static_cast<std::size_t>(i)); }
  const std::vector<Observation>& records() const { return records_; }

  const std::vector<double>& anchor_times() const { return anchors_; }
  int anchor_count() const { return static_cast<int>(anchors_.size()); }
  int interval_count() const { return anchor_count() - 1; }

  const TimeMap& time_map() const { return time_map_; }
  void set_time_map(const TimeMap& m) { time_map_ = m; }

  const std::vector<Group>& groups() const;
  /// Groups at one anchor index.
  std::vector<const Group*> groups_at(int anchor) const;
  const Group* find_group(int anchor, const Condition& x) const;

  /// Distinct conditions in first-seen-at-finalize (sorted) order.
  const std::vector<Condition>& conditions() const;

  ConditionEncoder make_encoder() const;

  /// Row-index pairs (i, j) between anchors k and k+1 sharing a condition and
  /// a non-negative pair key.
  std::vector<std::pair<Index, Index>> matched_pairs(int interval) const;

 private:
  std::vector<Observation> records_;
  std::vector<double> anchors_;
  std::vector<Group> groups_;
  std::map<Condition, int> condition_index_;
  std::vector<Condition> conditions_;
  TimeMap time_map_;
  int dim_ = 0;
  int cond_dim_ = 0;
  bool discrete_ = true;
  bool finalized_ = false;
};

}  // namespace clot
