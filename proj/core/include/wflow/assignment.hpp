#pragma once

// Dense square assignment problems.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace wflow {

struct AssignmentResult {
  std::vector<std::size_t> row_to_col;  // row n is matched with column row_to_col[n]
  double total_cost = 0.0;
  Eigen::VectorXd row_potential;  // u, with u_i + v_j <= c_ij and equality on the matching
  Eigen::VectorXd col_potential;  // v
};

/// Minimum-cost perfect matching (shortest augmenting path Hungarian method,
/// O(n^3)). Among equal-cost candidates the lowest column index is taken, so
/// the result is deterministic.
AssignmentResult solve_assignment(const Eigen::MatrixXd& cost);

/// Bottleneck assignment: min over perfect matchings of the max matched entry.
/// Binary search over the sorted entries with augmenting-path feasibility.
double bottleneck_assignment(const Eigen::MatrixXd& cost, std::vector<std::size_t>* row_to_col = nullptr);

/// True if the bipartite graph given by allowed(i, j) has a perfect matching.
bool has_perfect_matching(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed,
                          std::vector<std::size_t>* row_to_col = nullptr);

}  // namespace wflow
