#include "clot/condition.hpp"

#include <algorithm>
#include <string>

namespace clot {

bool Condition::operator<(const Condition& other) const {
  if (discrete_ != other.discrete_) return discrete_;
  if (discrete_) return id_ < other.id_;
  if (vec_.size() != other.vec_.size()) return vec_.size() < other.vec_.size();
  for (Index i = 0; i < vec_.size(); ++i) {
    if (vec_(i) != other.vec_(i)) return vec_(i) < other.vec_(i);
  }
  return false;
}

ConditionEncoder ConditionEncoder::for_discrete(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  CLOT_REQUIRE(std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
               "ConditionEncoder: duplicate discrete ids");
  CLOT_REQUIRE(!ids.empty(), "ConditionEncoder: empty id registry");
  ConditionEncoder e;
  e.discrete_ = true;
  e.ids_ = std::move(ids);
  e.dim_ = static_cast<int>(e.ids_.size());
  return e;
}

ConditionEncoder ConditionEncoder::for_continuous(int dim) {
  CLOT_REQUIRE(dim > 0, "ConditionEncoder: continuous dimension must be positive");
  ConditionEncoder e;
  e.discrete_ = false;
  e.dim_ = dim;
  return e;
}

int ConditionEncoder::index_of(int id) const {
  CLOT_REQUIRE(discrete_, "ConditionEncoder::index_of on continuous encoder");
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw validation_error("unknown condition id " + std::to_string(id));
  }
  return static_cast<int>(it - ids_.begin());
}

VectorXd ConditionEncoder::encode(const Condition& c) const {
  if (discrete_) {
    CLOT_REQUIRE(c.is_discrete(), "ConditionEncoder: expected a discrete condition");
    VectorXd v = VectorXd::Zero(dim_);
    v(index_of(c.id())) = 1.0;
    return v;
  }
  CLOT_REQUIRE(!c.is_discrete(), "ConditionEncoder: expected a continuous condition");
  CLOT_VALIDATE(c.vec().size() == dim_, "condition vector dimension mismatch");
  return c.vec();
}

MatrixXd ConditionEncoder::encode_batch(const std::vector<Condition>& cs) const {
  MatrixXd out(dim_, static_cast<Index>(cs.size()));
  for (std::size_t i = 0; i < cs.size(); ++i) {
    out.col(static_cast<Index>(i)) = encode(cs[i]);
  }
  return out;
}

}  // namespace clot
