#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "clot/common.hpp"

namespace clot {

/// Immutable description of how a flat parameter vector is carved into named
/// matrix segments.  Layouts are shared between a model's parameters and any
/// gradient/optimizer buffers so the flat views always line up.
class ParamLayout {
 public:
  struct Segment {
    std::string name;
    Index offset = 0;
    Index rows = 0;
    Index cols = 0;
    Index size() const { return rows * cols; }
  };

  /// Registers a segment and returns its index.  Names must be unique.
  int add(const std::string& name, Index rows, Index cols);

  int segment_count() const { return static_cast<int>(segments_.size()); }
  Index total_size() const { return total_; }
  const Segment& segment(int i) const { return segments_.at(static_cast<std::size_t>(i)); }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Index of a named segment; throws if absent.
  int index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

 private:
  std::vector<Segment> segments_;
  std::unordered_map<std::string, int> by_name_;
  Index total_ = 0;
};

/// Flat value vector plus a shared layout.  Matrix views alias the flat
/// storage, so flatten/unflatten round-trips are the identity by construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout)
      : layout_(std::move(layout)),
        values_(VectorXd::Zero(layout_ ? layout_->total_size() : 0)) {}

  const std::shared_ptr<const ParamLayout>& layout() const { return layout_; }
  Index size() const { return values_.size(); }

  VectorXd& values() { return values_; }
  const VectorXd& values() const { return values_; }

  Eigen::Map<MatrixXd> matrix(int seg_index);
  Eigen::Map<const MatrixXd> matrix(int seg_index) const;
  Eigen::Map<MatrixXd> matrix(const std::string& name);
  Eigen::Map<const MatrixXd> matrix(const std::string& name) const;

  void set_zero() { values_.setZero(); }

  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  VectorXd values_;
};

}  // namespace clot
