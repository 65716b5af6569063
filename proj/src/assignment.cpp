#include "uncseg/assignment.hpp"

#include <algorithm>
#include <limits>

#include "uncseg/error.hpp"

namespace uncseg {

std::vector<int> max_weight_assignment(const std::vector<double>& weights, int rows, int cols) {
  if (rows < 0 || cols < 0 || weights.size() != static_cast<std::size_t>(rows) * cols)
    throw Error("assignment matrix has the wrong size");
  std::vector<int> result(rows, -1);
  if (rows == 0 || cols == 0) return result;

  const int n = std::max(rows, cols);
  double top = 0.0;
  for (double w : weights) {
    if (w < 0) throw Error("assignment weights must be non-negative");
    top = std::max(top, w);
  }
  // Square cost matrix, 1-based, minimising top - weight (dummies cost top).
  auto cost = [&](int i, int j) {
    if (i > rows || j > cols) return top;
    return top - weights[static_cast<std::size_t>(i - 1) * cols + (j - 1)];
  };

  // Shortest augmenting path with potentials.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= cols; ++j)
    if (match[j] >= 1 && match[j] <= rows) result[match[j] - 1] = j - 1;
  return result;
}

}  // namespace uncseg
