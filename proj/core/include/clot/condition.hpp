#pragma once

#include <vector>

#include "clot/common.hpp"

namespace clot {

/// Side information attached to every observation: either a discrete label or
/// a raw feature vector.
class Condition {
 public:
  Condition() = default;

  static Condition discrete(int id) {
    Condition c;
    c.discrete_ = true;
    c.id_ = id;
    return c;
  }

  static Condition continuous(VectorXd v) {
    Condition c;
    c.discrete_ = false;
    c.vec_ = std::move(v);
    return c;
  }

  bool is_discrete() const { return discrete_; }

  int id() const {
    CLOT_REQUIRE(discrete_, "Condition::id on a continuous condition");
    return id_;
  }

  const VectorXd& vec() const {
    CLOT_REQUIRE(!discrete_, "Condition::vec on a discrete condition");
    return vec_;
  }

  bool operator==(const Condition& other) const {
    if (discrete_ != other.discrete_) return false;
    if (discrete_) return id_ == other.id_;
    return vec_.size() == other.vec_.size() && vec_ == other.vec_;
  }
  bool operator!=(const Condition& other) const { return !(*this == other); }

  /// Strict ordering for use as a grouping key (discrete before continuous,
  /// then by id / lexicographic entries).
  bool operator<(const Condition& other) const;

 private:
  bool discrete_ = true;
  int id_ = 0;
  VectorXd vec_;
};

/// Translates conditions into the vectors fed to FiLM embedders: discrete ids
/// become one-hot columns over the registered id set (sorted ascending),
/// continuous conditions pass through after a dimension check.
class ConditionEncoder {
 public:
  static ConditionEncoder for_discrete(std::vector<int> ids);
  static ConditionEncoder for_continuous(int dim);

  bool is_discrete() const { return discrete_; }
  int encoded_dim() const { return dim_; }
  const std::vector<int>& ids() const { return ids_; }

  /// Position of a discrete id in the registry; throws on unknown ids.
  int index_of(int id) const;

  VectorXd encode(const Condition& c) const;

  /// Encodes a whole batch as columns.
  MatrixXd encode_batch(const std::vector<Condition>& cs) const;

 private:
  bool discrete_ = true;
  int dim_ = 0;
  std::vector<int> ids_;
};

}  // namespace clot
