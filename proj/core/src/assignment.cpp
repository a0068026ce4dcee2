#include "clot/assignment.hpp"

#include <limits>

namespace clot {

// One augmenting pass per row: grow an alternating tree with Dijkstra-style
// label updates under dual feasibility, then flip the found path.  1-based
// arrays with column 0 as the virtual root keep the path-flip loop simple.
AssignmentResult solve_assignment(const MatrixXd& cost) {
  CLOT_REQUIRE(cost.rows() == cost.cols() && cost.rows() > 0,
               "solve_assignment: square nonempty cost matrix required");
  CLOT_VALIDATE(cost.allFinite(), "solve_assignment: non-finite cost entry");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> row_of_col(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> prev_col(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> visited(static_cast<std::size_t>(n) + 1, 0);
    do {
      visited[static_cast<std::size_t>(j0)] = 1;
      const int i0 = row_of_col[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (visited[static_cast<std::size_t>(j)]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                             v[static_cast<std::size_t>(j)];
        if (slack < min_slack[static_cast<std::size_t>(j)]) {
          min_slack[static_cast<std::size_t>(j)] = slack;
          prev_col[static_cast<std::size_t>(j)] = j0;
        }
        if (min_slack[static_cast<std::size_t>(j)] < delta) {
          delta = min_slack[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (visited[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(row_of_col[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          min_slack[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[static_cast<std::size_t>(j0)] != 0);
    while (j0 != 0) {
      const int j1 = prev_col[static_cast<std::size_t>(j0)];
      row_of_col[static_cast<std::size_t>(j0)] = row_of_col[static_cast<std::size_t>(j1)];
      j0 = j1;
    }
  }

  AssignmentResult out;
  out.col_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = row_of_col[static_cast<std::size_t>(j)];
    out.col_of_row[static_cast<std::size_t>(i) - 1] = j - 1;
    out.cost += cost(i - 1, j - 1);
  }
  return out;
}

}  // namespace clot
