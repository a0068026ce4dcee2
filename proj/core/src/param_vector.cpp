#include "clot/param_vector.hpp"

namespace clot {

int ParamLayout::add(const std::string& name, Index rows, Index cols) {
  CLOT_REQUIRE(rows >= 0 && cols >= 0, "ParamLayout: negative segment shape");
  CLOT_REQUIRE(by_name_.count(name) == 0, "ParamLayout: duplicate segment name " + name);
  Segment seg{name, total_, rows, cols};
  int index = static_cast<int>(segments_.size());
  segments_.push_back(seg);
  by_name_.emplace(name, index);
  total_ += seg.size();
  return index;
}

int ParamLayout::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  CLOT_REQUIRE(it != by_name_.end(), "ParamLayout: unknown segment " + name);
  return it->second;
}

Eigen::Map<MatrixXd> ParamVector::matrix(int seg_index) {
  const auto& seg = layout_->segment(seg_index);
  return {values_.data() + seg.offset, seg.rows, seg.cols};
}

Eigen::Map<const MatrixXd> ParamVector::matrix(int seg_index) const {
  const auto& seg = layout_->segment(seg_index);
  return {values_.data() + seg.offset, seg.rows, seg.cols};
}

Eigen::Map<MatrixXd> ParamVector::matrix(const std::string& name) {
  return matrix(layout_->index_of(name));
}

Eigen::Map<const MatrixXd> ParamVector::matrix(const std::string& name) const {
  return matrix(layout_->index_of(name));
}

}  // namespace clot
