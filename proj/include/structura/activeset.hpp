#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "structura/oracles.hpp"

namespace structura {

struct SparseMapConfig {
  std::size_t max_iterations = 10;
  double support_tolerance = 1e-9;
};

// Active set S, its weights p and the inverse of the bordered system
//   K = [ 0  1^T      ]
//       [ 1  Mbar^T Mbar ]
// whose lower-right block is Q = Z - z z^T / (1^T z).
struct ActiveSetState {
  std::vector<Structure> active;
  Eigen::VectorXd p;
  Eigen::MatrixXd kkt_inverse;
  Eigen::MatrixXd mbar;  // degree-scaled m columns, d x k
  Eigen::MatrixXd nbar;  // n columns, dn x k
  double tau = 0.0;

  std::size_t size() const { return active.size(); }
  Eigen::MatrixXd q() const;
};

struct SparseMapSolution {
  std::vector<double> mu;
  std::vector<double> nu;
  ActiveSetState state;
  bool converged = false;
  std::size_t iterations = 0;
};

// Solves min_{p in simplex} 1/2 ||eta_m - Mtilde p||^2 - <eta_n, N p> where
// Mtilde scales row k of every structure by 1 / delta[k]. A warm state
// from an earlier solve of the same factor restarts from its support.
SparseMapSolution solve_sparsemap(const MapOracle& oracle,
                                  std::span<const double> eta_m,
                                  std::span<const double> eta_n,
                                  std::span<const double> delta,
                                  const SparseMapConfig& cfg = {},
                                  const ActiveSetState* warm = nullptr);

// (d_M, d_N) = (Mbar Q Mbar^T d, Nbar Q Mbar^T d).
std::pair<std::vector<double>, std::vector<double>> jvp_sparsemap(
    const SparseMapSolution& sol, std::span<const double> d);

// 1/2 ||eta_m - mu||^2 - <eta_n, nu>.
double sparsemap_objective(std::span<const double> eta_m,
                           std::span<const double> eta_n,
                           std::span<const double> mu,
                           std::span<const double> nu);

}  // namespace structura
