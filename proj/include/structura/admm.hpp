#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "structura/activeset.hpp"
#include "structura/factors.hpp"
#include "structura/graph.hpp"

namespace structura {

// Snapshot passed to AdmmConfig::trace after every iteration.
struct AdmmTrace {
  std::size_t iteration = 0;
  std::span<const double> mu;
  std::span<const double> lambda;  // per slot, scatter layout
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct AdmmConfig {
  double gamma = 0.1;
  std::size_t max_outer = 1000;
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  SparseMapConfig inner{};
  std::size_t backward_power_iterations = 100;
  bool force_generic = false;
  std::size_t num_threads = 1;  // 0 = hardware concurrency
  std::function<void(const AdmmTrace&)> trace;
};

// eta_m over the graph's variables; eta_n[f] over factor f's additionals.
struct Scores {
  std::vector<double> eta_m;
  std::vector<std::vector<double>> eta_n;
};

// Scores with every factor's eta_N taken from its attachment.
Scores make_scores(const FactorGraph& graph, std::vector<double> eta_m);

enum class SolveStatus { Converged, MaxIterations };

const char* to_string(SolveStatus s);

struct LpSparseMapSolution {
  std::vector<double> mu;
  std::vector<LocalSolution> factors;
  SolveStatus status = SolveStatus::MaxIterations;
  std::size_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;

  bool converged() const { return status == SolveStatus::Converged; }
};

LpSparseMapSolution solve(const FactorGraph& graph, const Scores& scores,
                          const AdmmConfig& cfg = {});

// primal = ||C~ mu - local||, dual = ||mu - mu_prev||.
std::pair<double, double> residuals(const FactorGraph& graph, std::span<const double> mu,
                                    std::span<const double> mu_prev,
                                    std::span<const double> local);

}  // namespace structura
