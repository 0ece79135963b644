#include "wflow/assignment.hpp"

#include <algorithm>
#include <limits>

#include "wflow/error.hpp"

namespace wflow {

AssignmentResult solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DomainError("solve_assignment: cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is the virtual root of each search.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentResult r;
  r.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) r.row_to_col[p[j] - 1] = j - 1;
  r.row_potential.resize(static_cast<Eigen::Index>(n));
  r.col_potential.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    r.row_potential[static_cast<Eigen::Index>(k)] = u[k + 1];
    r.col_potential[static_cast<Eigen::Index>(k)] = v[k + 1];
  }
  for (std::size_t i = 0; i < n; ++i)
    r.total_cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.row_to_col[i]));
  return r;
}

bool has_perfect_matching(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed,
                          std::vector<std::size_t>* row_to_col) {
  const auto n = static_cast<std::size_t>(allowed.rows());
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_col(n, kNone);  // column -> row
  std::vector<char> seen(n);

  // Kuhn's augmenting paths, iterative DFS.
  auto augment = [&](std::size_t root) {
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<std::size_t> row_stack{root}, next_col{0}, via_col;
    while (!row_stack.empty()) {
      const std::size_t i = row_stack.back();
      std::size_t& j = next_col.back();
      bool descended = false;
      for (; j < n; ++j) {
        if (!allowed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) || seen[j]) continue;
        seen[j] = 1;
        if (match_col[j] == kNone) {
          // flip the path root -> ... -> i -> j
          via_col.push_back(j);
          for (std::size_t k = row_stack.size(); k-- > 0;) match_col[via_col[k]] = row_stack[k];
          return true;
        }
        via_col.push_back(j);
        const std::size_t next_row = match_col[j];
        ++j;  // j aliases next_col.back(); advance before the push invalidates it
        row_stack.push_back(next_row);
        next_col.push_back(0);
        descended = true;
        break;
      }
      if (!descended) {
        row_stack.pop_back();
        next_col.pop_back();
        if (!via_col.empty()) via_col.pop_back();
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i)
    if (!augment(i)) return false;
  if (row_to_col) {
    row_to_col->assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) (*row_to_col)[match_col[j]] = j;
  }
  return true;
}

double bottleneck_assignment(const Eigen::MatrixXd& cost, std::vector<std::size_t>* row_to_col) {
  if (cost.rows() != cost.cols()) throw DomainError("bottleneck_assignment: cost matrix must be square");
  std::vector<double> values(cost.data(), cost.data() + cost.size());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::size_t lo = 0, hi = values.size() - 1;  // values[hi] is always feasible
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (has_perfect_matching((cost.array() <= values[mid]).matrix())) hi = mid;
    else lo = mid + 1;
  }
  if (row_to_col) has_perfect_matching((cost.array() <= values[lo]).matrix(), row_to_col);
  return values[lo];
}

}  // namespace wflow
