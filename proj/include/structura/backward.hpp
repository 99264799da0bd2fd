#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "structura/admm.hpp"
#include "structura/graph.hpp"

namespace structura {

struct BackwardConfig {
  std::size_t max_iterations = 100;
  double eps = 1e-9;
};

struct JvpResult {
  std::vector<double> d_m;               // over the graph's variables
  std::vector<std::vector<double>> d_n;  // per factor, over its additionals
  std::size_t iterations = 0;
  bool converged = false;
};

// Gradient of <d, mu> with respect to eta_M and every eta_{f,N}, by
// iterating local Jacobian products and averaging to the fixed point.
JvpResult jvp(const FactorGraph& graph, const LpSparseMapSolution& solution,
              std::span<const double> d, const BackwardConfig& cfg = {});

// Row i is jvp(e_i).d_m. Guarded to at most 64 variables.
Eigen::MatrixXd materialize_jacobian(const FactorGraph& graph,
                                     const LpSparseMapSolution& solution,
                                     const BackwardConfig& cfg = {});

}  // namespace structura
