#include <cmath>
#include <limits>
#include <vector>

#include "structura/error.hpp"
#include "structura/oracles.hpp"

namespace structura {

namespace {

constexpr double kAbsent = -std::numeric_limits<double>::infinity();

// Chu-Liu-Edmonds on a dense weight matrix; node 0 is the root and
// w(h, c) = kAbsent marks a missing arc. Returns the parent of each node.
std::vector<int> chu_liu_edmonds(const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  std::vector<int> parent(n, -1);
  for (int c = 1; c < n; ++c) {
    double best = kAbsent;
    for (int h = 0; h < n; ++h) {
      if (h == c || w(h, c) == kAbsent) continue;
      if (parent[c] < 0 || w(h, c) > best) {
        best = w(h, c);
        parent[c] = h;
      }
    }
    if (parent[c] < 0) throw SolverError("arborescence: node without incoming arcs");
  }

  // Find one cycle among the chosen arcs.
  std::vector<int> color(n, 0);
  std::vector<int> cycle;
  for (int start = 1; start < n && cycle.empty(); ++start) {
    if (color[start] != 0) continue;
    int v = start;
    while (v > 0 && color[v] == 0) {
      color[v] = start;
      v = parent[v];
    }
    if (v > 0 && color[v] == start) {
      int u = v;
      do {
        cycle.push_back(u);
        u = parent[u];
      } while (u != v);
    }
    for (int u = start; u > 0 && color[u] == start; u = parent[u]) color[u] = -1;
  }
  if (cycle.empty()) return parent;

  std::vector<bool> in_cycle(n, false);
  for (int v : cycle) in_cycle[v] = true;
  std::vector<int> new_id(n, -1);
  std::vector<int> old_id;
  for (int v = 0; v < n; ++v) {
    if (!in_cycle[v]) {
      new_id[v] = static_cast<int>(old_id.size());
      old_id.push_back(v);
    }
  }
  const int contracted = static_cast<int>(old_id.size());
  const int m = contracted + 1;

  Eigen::MatrixXd w2 = Eigen::MatrixXd::Constant(m, m, kAbsent);
  std::vector<int> enter(m, -1);  // for an outside head u: cycle node it enters
  std::vector<int> leave(m, -1);  // for an outside dependent v: cycle node it leaves
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v || w(u, v) == kAbsent) continue;
      if (!in_cycle[u] && !in_cycle[v]) {
        w2(new_id[u], new_id[v]) = w(u, v);
      } else if (!in_cycle[u] && in_cycle[v]) {
        double s = w(u, v) - w(parent[v], v);
        int nu = new_id[u];
        if (enter[nu] < 0 || s > w2(nu, contracted)) {
          w2(nu, contracted) = s;
          enter[nu] = v;
        }
      } else if (in_cycle[u] && !in_cycle[v]) {
        int nv = new_id[v];
        if (leave[nv] < 0 || w(u, v) > w2(contracted, nv)) {
          w2(contracted, nv) = w(u, v);
          leave[nv] = u;
        }
      }
    }
  }

  std::vector<int> sub = chu_liu_edmonds(w2);
  std::vector<int> out = parent;
  for (int nv = 1; nv < contracted; ++nv) {
    int v = old_id[nv];
    out[v] = sub[nv] == contracted ? leave[nv] : old_id[sub[nv]];
  }
  int head = sub[contracted];
  out[enter[head]] = old_id[head];
  return out;
}

Structure tree_structure(const std::vector<int>& parent, const Eigen::MatrixXd& grid) {
  const int words = static_cast<int>(grid.cols());
  Structure out;
  out.m.assign(static_cast<std::size_t>(words) * words, 0.0);
  double score = 0.0;
  for (int c = 0; c < words; ++c) {
    int h = parent[c + 1];
    std::size_t cell = h == 0 ? static_cast<std::size_t>(c) * words + c
                              : static_cast<std::size_t>(h - 1) * words + c;
    out.m[cell] = 1.0;
    score += grid(h, c);
  }
  out.score = score;
  return out;
}

}  // namespace

Structure map_arborescence(const Eigen::MatrixXd& arc_scores, bool single_root) {
  const Eigen::Index words = arc_scores.cols();
  if (words < 1 || arc_scores.rows() != words + 1) {
    throw InvalidArgument("map_arborescence: expected an (m+1) x m score grid");
  }
  if (!arc_scores.allFinite()) throw InvalidArgument("map_arborescence: non-finite score");

  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(words + 1, words + 1, kAbsent);
  for (Eigen::Index h = 0; h <= words; ++h) {
    for (Eigen::Index c = 0; c < words; ++c) {
      if (h != c + 1) w(h, c + 1) = arc_scores(h, c);
    }
  }

  if (!single_root || words == 1) {
    return tree_structure(chu_liu_edmonds(w), arc_scores);
  }

  Structure best;
  bool have = false;
  for (Eigen::Index r = 0; r < words; ++r) {
    Eigen::MatrixXd wr = w;
    for (Eigen::Index c = 0; c < words; ++c) {
      if (c != r) wr(0, c + 1) = kAbsent;
    }
    Structure s = tree_structure(chu_liu_edmonds(wr), arc_scores);
    if (!have || s.score > best.score) {
      best = std::move(s);
      have = true;
    }
  }
  return best;
}

}  // namespace structura
