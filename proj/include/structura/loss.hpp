#pragma once

#include <span>
#include <vector>

#include "structura/admm.hpp"
#include "structura/graph.hpp"

namespace structura {

// Gold structure per factor plus the global 0/1 vector they agree on.
struct GoldAssignment {
  std::vector<std::vector<double>> m;  // per factor, over its variables
  std::vector<std::vector<double>> n;  // per factor, over its additionals
  std::vector<double> global;

  // Restricts a global 0/1 vector to every factor and derives n.
  static GoldAssignment from_global(const FactorGraph& graph, std::span<const double> y);
  // Builds the global vector from per-factor structures; shared variables
  // must agree.
  static GoldAssignment from_factors(const FactorGraph& graph,
                                     std::vector<std::vector<double>> m,
                                     std::vector<std::vector<double>> n);
};

// Throws ValidationError naming the first violated condition.
void validate_gold(const FactorGraph& graph, const GoldAssignment& gold);

struct LossGradient {
  std::vector<double> eta_m;
  std::vector<std::vector<double>> eta_n;
};

struct LossResult {
  double value = 0.0;
  bool exact = false;  // false when the forward solve did not converge
  LossGradient grad;
  LpSparseMapSolution solution;
};

// Loss value at an existing forward solution.
double loss_at(const FactorGraph& graph, const Scores& scores,
               const LpSparseMapSolution& solution, const GoldAssignment& gold);

double loss_value(const FactorGraph& graph, const Scores& scores, const GoldAssignment& gold,
                  const AdmmConfig& cfg = {});

LossGradient loss_grad(const FactorGraph& graph, const LpSparseMapSolution& solution,
                       const GoldAssignment& gold);

// Forward solve, value and gradients in one call.
LossResult evaluate_loss(const FactorGraph& graph, const Scores& scores,
                         const GoldAssignment& gold, const AdmmConfig& cfg = {});

}  // namespace structura
