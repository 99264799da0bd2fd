#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace structura {

enum class Branch {
  Box,             // plain clip
  ClipFeasible,    // clip already satisfies the coupling constraint
  EqualityTight,   // singly-constrained bounded QP at equality
  Cone,            // projection onto {delta_i mu_i <= delta_d mu_d}
  PairCase1,       // delta1 mu1 > delta2 mu2
  PairCase2,       // delta2 mu2 > delta1 mu1
  PairCase3,       // delta1 mu1 = delta2 mu2
  OrOutStep1,      // clip is feasible
  OrOutStep2,      // box(cone(eta)) is feasible
  OrOutStep3,      // sum of inputs equals the output
};

const char* to_string(Branch b);

// Everything the backward pass needs to reproduce the local Jacobian of a
// closed-form solve.
struct ClosedFormCertificate {
  Branch branch = Branch::Box;
  std::vector<bool> support;        // strictly interior coordinates
  double tau = 0.0;
  std::vector<double> weights;      // EqualityTight / OrOutStep3: w
  std::vector<bool> cone_set;       // Cone / OrOutStep2: S(rho)
  std::size_t cone_size = 0;        // rho
  std::vector<bool> negation_mask;  // empty = no negation
  bool pair_flip = false;
  Eigen::Matrix<double, 2, 3> pair_jacobian = Eigen::Matrix<double, 2, 3>::Zero();
  std::vector<double> delta;
};

struct ClosedFormResult {
  std::vector<double> mu;
  std::vector<double> nu;  // pair: {mu12}
  ClosedFormCertificate cert;
};

struct ScbqpProblem {
  std::vector<double> eta;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> weights;
  double rhs = 0.0;
};

ClosedFormResult project_box(std::span<const double> eta,
                             std::span<const double> lower,
                             std::span<const double> upper);

// min 1/2 ||mu - eta||^2 s.t. lower <= mu <= upper, w^T mu = rhs.
// The solution is mu_i = clip(w_i tau + eta_i).
ClosedFormResult solve_scbqp(const ScbqpProblem& p);

// d -> d - w (w^T d) / (w^T w) on the support, zero elsewhere.
std::vector<double> jvp_scbqp(const ClosedFormCertificate& cert,
                              std::span<const double> w,
                              std::span<const double> d);

ClosedFormResult solve_xor(std::span<const double> eta, std::span<const double> delta);
ClosedFormResult solve_or(std::span<const double> eta, std::span<const double> delta);
ClosedFormResult solve_budget(std::span<const double> eta, std::span<const double> delta,
                              double budget);
ClosedFormResult solve_at_most_one(std::span<const double> eta,
                                   std::span<const double> delta);
ClosedFormResult solve_knapsack(std::span<const double> eta, std::span<const double> delta,
                                std::span<const double> costs, double budget);
ClosedFormResult project_cone_a1(std::span<const double> eta,
                                 std::span<const double> delta);
ClosedFormResult solve_orout(std::span<const double> eta, std::span<const double> delta);

// x_k -> 1/delta_k - x_k on masked coordinates.
std::vector<double> flip_masked(std::span<const double> x, std::span<const double> delta,
                                const std::vector<bool>& mask);

template <class Inner>
ClosedFormResult apply_negation(Inner&& inner, const std::vector<bool>& mask,
                                std::span<const double> eta,
                                std::span<const double> delta) {
  std::vector<double> flipped = flip_masked(eta, delta, mask);
  ClosedFormResult r = inner(std::span<const double>(flipped), delta);
  r.mu = flip_masked(r.mu, delta, mask);
  if (r.cert.negation_mask.empty()) r.cert.negation_mask.assign(mask.size(), false);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    r.cert.negation_mask[k] = r.cert.negation_mask[k] != mask[k];
  }
  return r;
}

struct PairScores {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta12 = 0.0;
};

// Two-state parametrization (per-state variable scores {1F, 1T, 2F, 2T}
// and joint scores {FF, FT, TF, TT}) to the binary form (eta1, eta2, eta12).
PairScores pair_reparametrize(std::span<const double> eta_m, std::span<const double> eta_n,
                              double delta1, double delta2);

// mu = (mu1, mu2), nu = {mu12}.
ClosedFormResult solve_pair(double eta1, double eta2, double eta12, double delta1,
                            double delta2);

// J v for a direction v over the factor's scores. For pairs v covers
// (eta1, eta2, eta12) and the result covers (mu1, mu2).
std::vector<double> jvp_closed_form(const ClosedFormCertificate& cert,
                                    std::span<const double> v);
// J^T d. For pairs d covers (mu1, mu2) and the result (eta1, eta2, eta12).
std::vector<double> vjp_closed_form(const ClosedFormCertificate& cert,
                                    std::span<const double> d);

}  // namespace structura
