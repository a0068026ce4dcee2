#pragma once

#include <vector>

#include "clot/common.hpp"

namespace clot {

struct AssignmentResult {
  std::vector<int> col_of_row;  // col_of_row[i] = column matched to row i
  double cost = 0.0;            // sum of matched entries
};

/// Exact minimum-cost perfect matching on a square cost matrix via shortest
/// augmenting paths with dual potentials (O(n^3)).  Rows index one point set,
/// columns the other.
AssignmentResult solve_assignment(const MatrixXd& cost);

}  // namespace clot
