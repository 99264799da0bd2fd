#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <random>

#include "structura/admm.hpp"
#include "structura/backward.hpp"
#include "structura/graph.hpp"
#include "structura/oracles.hpp"

namespace structura::reference {

struct BruteForceResult {
  std::vector<double> mu;
  std::vector<double> nu;
  std::vector<double> p;  // weight per input structure
  double objective = 0.0;
};

// Exhaustive SparseMAP: solves the equality-constrained system on every
// candidate support and keeps the best feasible one. At most 20 structures.
BruteForceResult brute_force_sparsemap(std::span<const Structure> structures,
                                       std::span<const double> eta_m,
                                       std::span<const double> eta_n,
                                       std::span<const double> delta);

// a^T x <= b, or a^T x == b.
struct LinearConstraint {
  std::vector<double> a;
  double b = 0.0;
  bool equality = false;
};

// Box plus linear constraints. The first num_quadratic coordinates carry
// the quadratic term of the factor objective; the rest enter linearly.
struct Polytope {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LinearConstraint> constraints;
  std::size_t num_quadratic = 0;
};

// The degree-scaled feasible set of a closed-form factor, in (mu, nu)
// coordinates with the same layout as the factor's local solution.
Polytope factor_polytope(const FactorAttachment& att, std::span<const double> delta);

// Euclidean projection onto the polytope: interior point, then an exact
// solve on the identified face.
std::vector<double> project_polytope(const Polytope& poly, std::span<const double> x,
                                     double tol = 1e-10, std::size_t max_iterations = 200);

using Projector = std::function<std::vector<double>(std::span<const double>)>;

struct PgResult {
  std::vector<double> x;
  bool converged = false;
  std::size_t iterations = 0;
};

// Accelerated projected gradient on
//   1/2 ||x[:q] - eta[:q]||^2 - <eta[q:], x[q:]>.
PgResult projected_gradient_qp(const Projector& project, std::span<const double> eta,
                               std::size_t num_quadratic, std::size_t max_steps = 20000,
                               double step_size = 1.0, double tol = 1e-11);

using VectorMap = std::function<std::vector<double>(std::span<const double>)>;

// (<d, f(eta + h v)> - <d, f(eta - h v)>) / (2 h).
double finite_difference_jvp(const VectorMap& f, std::span<const double> eta,
                             std::span<const double> v, std::span<const double> d, double h);

// |a - b| / max(|a|, |b|, floor); with unit-norm probes the floor keeps
// near-zero directional derivatives from amplifying solver noise.
double relative_error(double a, double b, double floor = 1e-2);

// Random unit-norm perturbation v (over eta_M and every eta_{f,N}) and
// unit-norm probe d over mu.
struct GradientProbe {
  std::vector<double> v_m;
  std::vector<std::vector<double>> v_n;
  std::vector<double> d;
};

GradientProbe random_probe(const FactorGraph& graph, std::mt19937_64& rng);

struct GradientCheck {
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  bool support_stable = false;  // one-sided differences agree
  bool converged = false;       // all forward solves converged
};

// Backward product <jvp(d), v> against the central difference of <d, mu>.
GradientCheck check_gradient(const FactorGraph& graph, const Scores& scores,
                             const AdmmConfig& admm, const BackwardConfig& backward,
                             const GradientProbe& probe, double h);

}  // namespace structura::reference
