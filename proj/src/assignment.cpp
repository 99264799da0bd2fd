#include <limits>
#include <vector>

#include "structura/error.hpp"
#include "structura/oracles.hpp"

namespace structura {

// Kuhn-Munkres with row/column potentials, O(n^3), on costs = -scores.
Structure map_assignment(const Eigen::MatrixXd& scores) {
  const int n = static_cast<int>(scores.rows());
  if (n < 1 || scores.cols() != n) {
    throw InvalidArgument("map_assignment: score grid must be square and non-empty");
  }
  if (!scores.allFinite()) throw InvalidArgument("map_assignment: non-finite score");

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = -scores(i0 - 1, j - 1) - u[i0] - v[j];
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
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Structure out;
  out.m.assign(static_cast<std::size_t>(n) * n, 0.0);
  double score = 0.0;
  for (int j = 1; j <= n; ++j) {
    int i = match[j] - 1;
    out.m[static_cast<std::size_t>(i) * n + (j - 1)] = 1.0;
    score += scores(i, j - 1);
  }
  out.score = score;
  return out;
}

}  // namespace structura
