#include "structura/loss.hpp"

#include <cmath>
#include <string>

#include "structura/error.hpp"
#include "structura/factors.hpp"

namespace structura {

GoldAssignment GoldAssignment::from_global(const FactorGraph& graph,
                                           std::span<const double> y) {
  if (y.size() != graph.num_variables()) {
    throw ValidationError("gold: expected " + std::to_string(graph.num_variables()) +
                          " entries, got " + std::to_string(y.size()));
  }
  GoldAssignment g;
  g.global.assign(y.begin(), y.end());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& att = graph.factor(f);
    std::vector<double> m;
    m.reserve(att.degree());
    for (std::size_t j : att.variables) m.push_back(y[j]);
    std::vector<double> n;
    try {
      n = implied_additionals(att, m);
    } catch (const std::exception& e) {
      throw ValidationError("gold: factor " + std::to_string(f) + ": " + e.what());
    }
    g.m.push_back(std::move(m));
    g.n.push_back(std::move(n));
  }
  return g;
}

GoldAssignment GoldAssignment::from_factors(const FactorGraph& graph,
                                            std::vector<std::vector<double>> m,
                                            std::vector<std::vector<double>> n) {
  if (m.size() != graph.num_factors() || n.size() != graph.num_factors()) {
    throw ValidationError("gold: expected structures for " +
                          std::to_string(graph.num_factors()) + " factors");
  }
  GoldAssignment g;
  g.global.assign(graph.num_variables(), 0.0);
  std::vector<bool> seen(graph.num_variables(), false);
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& vars = graph.factor(f).variables;
    if (m[f].size() != vars.size()) {
      throw ValidationError("gold: factor " + std::to_string(f) + " expects " +
                            std::to_string(vars.size()) + " variable values");
    }
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const std::size_t j = vars[k];
      if (seen[j] && g.global[j] != m[f][k]) {
        throw ValidationError("gold: factor " + std::to_string(f) + " disagrees on variable " +
                              std::to_string(j));
      }
      g.global[j] = m[f][k];
      seen[j] = true;
    }
  }
  g.m = std::move(m);
  g.n = std::move(n);
  return g;
}

void validate_gold(const FactorGraph& graph, const GoldAssignment& gold) {
  if (gold.global.size() != graph.num_variables()) {
    throw ValidationError("gold: global vector has the wrong length");
  }
  for (std::size_t j = 0; j < gold.global.size(); ++j) {
    if (gold.global[j] != 0.0 && gold.global[j] != 1.0) {
      throw ValidationError("gold: variable " + std::to_string(j) + " is not 0/1");
    }
  }
  if (gold.m.size() != graph.num_factors() || gold.n.size() != graph.num_factors()) {
    throw ValidationError("gold: expected structures for " +
                          std::to_string(graph.num_factors()) + " factors");
  }
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& att = graph.factor(f);
    if (gold.m[f].size() != att.degree()) {
      throw ValidationError("gold: factor " + std::to_string(f) + " has the wrong length");
    }
    for (std::size_t k = 0; k < att.degree(); ++k) {
      if (gold.m[f][k] != gold.global[att.variables[k]]) {
        throw ValidationError("gold: factor " + std::to_string(f) + " disagrees on variable " +
                              std::to_string(att.variables[k]));
      }
    }
    if (!is_valid_structure(att, gold.m[f], gold.n[f])) {
      throw ValidationError("gold: factor " + std::to_string(f) + " (" +
                            std::string(to_string(att.kind)) +
                            ") assignment violates the factor's constraint");
    }
  }
}

double loss_at(const FactorGraph& graph, const Scores& scores,
               const LpSparseMapSolution& solution, const GoldAssignment& gold) {
  const auto& mu = solution.mu;
  const auto& y = gold.global;
  double value = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    value += scores.eta_m[j] * (mu[j] - y[j]) + 0.5 * (y[j] * y[j] - mu[j] * mu[j]);
  }
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& eta = scores.eta_n[f];
    const auto& nu = solution.factors[f].nu;
    for (std::size_t k = 0; k < eta.size(); ++k) value += eta[k] * (nu[k] - gold.n[f][k]);
  }
  return value;
}

double loss_value(const FactorGraph& graph, const Scores& scores, const GoldAssignment& gold,
                  const AdmmConfig& cfg) {
  return evaluate_loss(graph, scores, gold, cfg).value;
}

LossGradient loss_grad(const FactorGraph& graph, const LpSparseMapSolution& solution,
                       const GoldAssignment& gold) {
  validate_gold(graph, gold);
  LossGradient g;
  g.eta_m.resize(solution.mu.size());
  for (std::size_t j = 0; j < g.eta_m.size(); ++j) g.eta_m[j] = solution.mu[j] - gold.global[j];
  g.eta_n.resize(graph.num_factors());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& nu = solution.factors[f].nu;
    g.eta_n[f].resize(nu.size());
    for (std::size_t k = 0; k < nu.size(); ++k) g.eta_n[f][k] = nu[k] - gold.n[f][k];
  }
  return g;
}

LossResult evaluate_loss(const FactorGraph& graph, const Scores& scores,
                         const GoldAssignment& gold, const AdmmConfig& cfg) {
  validate_gold(graph, gold);
  LossResult r;
  r.solution = solve(graph, scores, cfg);
  r.exact = r.solution.converged();
  r.value = loss_at(graph, scores, r.solution, gold);
  r.grad = loss_grad(graph, r.solution, gold);
  return r;
}

}  // namespace structura
