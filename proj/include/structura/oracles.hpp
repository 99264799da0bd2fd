#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace structura {

// Finite stand-in for -infinity in padded score grids.
inline constexpr double kNegativeInfinity = -1e18;

// One structure of a factor: variable assignment m, additional statistics
// n, and its score under the query that produced it.
struct Structure {
  std::vector<double> m;
  std::vector<double> n;
  double score = 0.0;
};

// Returns the highest-scoring structure for (eta_m, eta_n).
using MapOracle =
    std::function<Structure(std::span<const double> eta_m, std::span<const double> eta_n)>;

double structure_score(const Structure& s, std::span<const double> eta_m,
                       std::span<const double> eta_n);

// Argmax over an explicit list; ties go to the earliest entry.
Structure map_enumerate(std::span<const Structure> structures,
                        std::span<const double> eta_m,
                        std::span<const double> eta_n);

// Best state path. unary is L x S; transition is S x S (from, to).
// m is the position-major one-hot path (L*S), n holds one indicator per
// (position, from, to) triple ((L-1)*S*S). Among optimal paths the
// lexicographically smallest state sequence is returned.
Structure map_viterbi(const Eigen::MatrixXd& unary,
                      const Eigen::MatrixXd& transition);
// Position-dependent transitions: transitions[i] scores the step from
// position i to i+1.
Structure map_viterbi(const Eigen::MatrixXd& unary,
                      std::span<const Eigen::MatrixXd> transitions);

// Maximum spanning arborescence over m words. arc_scores is (m+1) x m:
// row 0 holds root arcs, row h+1 arcs leaving word h; column c is the
// dependent word. Self arcs (row c+1, column c) are ignored.
// m is returned in the packed m x m layout: entry (h, c), h != c, is the
// arc h -> c and entry (c, c) is the root arc of c.
Structure map_arborescence(const Eigen::MatrixXd& arc_scores,
                           bool single_root = false);

// Maximum-weight perfect matching on a square grid; m is the row-major
// permutation matrix.
Structure map_assignment(const Eigen::MatrixXd& scores);

}  // namespace structura
