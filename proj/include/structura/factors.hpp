#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "structura/activeset.hpp"
#include "structura/closedform.hpp"
#include "structura/graph.hpp"
#include "structura/oracles.hpp"

namespace structura {

// Length of eta_N for a factor.
std::size_t additional_arity(const FactorAttachment& att);

// MAP oracle over the factor's structures (variables in att.variables
// order, additionals in the kind's declared layout).
MapOracle make_oracle(const FactorAttachment& att);

// Every structure of the factor. For Budget and Knapsack these are the
// vertices of the relaxed polytope, which may be fractional. Throws when
// more than `limit` structures exist.
std::vector<Structure> enumerate_structures(const FactorAttachment& att,
                                            std::size_t limit = 4096);

// True if (m, n) is an integral structure of the factor.
bool is_valid_structure(const FactorAttachment& att, std::span<const double> m,
                        std::span<const double> n);

// Additional statistics n implied by a 0/1 variable assignment.
std::vector<double> implied_additionals(const FactorAttachment& att,
                                        std::span<const double> m);

struct LocalSolution {
  std::vector<double> mu;  // degree-scaled local copy of the factor's variables
  std::vector<double> nu;  // additional statistics N p
  std::variant<SparseMapSolution, ClosedFormCertificate> detail;
  bool converged = true;

  bool closed_form() const { return std::holds_alternative<ClosedFormCertificate>(detail); }
};

// Solves the factor's degree-adjusted QP at local scores (eta_m, eta_n).
// Closed-form kinds bypass the active set unless force_generic is set.
LocalSolution solve_local(const FactorAttachment& att, std::span<const double> eta_m,
                          std::span<const double> eta_n, std::span<const double> delta,
                          const SparseMapConfig& cfg, bool force_generic,
                          const LocalSolution* warm = nullptr);

// (J_M^T d, J_N^T d) for the local solution.
std::pair<std::vector<double>, std::vector<double>> local_vjp(const FactorAttachment& att,
                                                              const LocalSolution& sol,
                                                              std::span<const double> d);

}  // namespace structura
