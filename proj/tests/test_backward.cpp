#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "structura/admm.hpp"
#include "structura/backward.hpp"
#include "structura/error.hpp"
#include "structura/reference.hpp"
#include "support.hpp"

using namespace structura;
using structura::testing::max_abs_diff;

namespace {

FactorGraph xor3() {
  FactorGraph g;
  g.add_variables(3);
  g.attach_factor(make_xor({0, 1, 2}));
  g.finalize();
  return g;
}

AdmmConfig tight() {
  AdmmConfig cfg;
  cfg.eps_primal = cfg.eps_dual = 1e-12;
  cfg.max_outer = 100000;
  return cfg;
}

}  // namespace

TEST_CASE("single xor") {
  auto g = xor3();
  auto sol = solve(g, make_scores(g, {0.5, 0.3, 0.1}));
  auto r = jvp(g, sol, std::vector<double>{1, 0, 0});
  CHECK(r.converged);
  CHECK(max_abs_diff(r.d_m, std::vector<double>{2.0 / 3, -1.0 / 3, -1.0 / 3}) <= 1e-10);
  REQUIRE(r.d_n.size() == 1);
  CHECK(r.d_n[0].empty());

  auto z = jvp(g, sol, std::vector<double>{0, 0, 0});
  CHECK(z.iterations == 1);
  CHECK(max_abs_diff(z.d_m, std::vector<double>{0, 0, 0}) == 0.0);

  Eigen::MatrixXd j = materialize_jacobian(g, sol);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(3, 3) - Eigen::MatrixXd::Constant(3, 3, 1.0 / 3);
  CHECK((j - expect).cwiseAbs().maxCoeff() <= 1e-10);

  auto s1 = solve(g, make_scores(g, {10, 0, 0}));
  auto r1 = jvp(g, s1, std::vector<double>{0.2, 1, -3});
  CHECK(max_abs_diff(r1.d_m, std::vector<double>{0, 0, 0}) <= 1e-14);
  CHECK(materialize_jacobian(g, s1).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("direction length and size guard") {
  auto g = xor3();
  auto sol = solve(g, make_scores(g, {0.5, 0.3, 0.1}));
  CHECK_THROWS_AS(jvp(g, sol, std::vector<double>{1, 0}), InvalidArgument);
  FactorGraph big;
  big.add_variables(65);
  std::vector<std::size_t> all(65);
  for (std::size_t j = 0; j < 65; ++j) all[j] = j;
  big.attach_factor(make_xor(all));
  big.finalize();
  auto sb = solve(big, make_scores(big, std::vector<double>(65, 0.0)));
  CHECK_THROWS_AS(materialize_jacobian(big, sb), InvalidArgument);
}

TEST_CASE("backward agrees with finite differences on random graphs") {
  std::mt19937_64 rng(123);
  BackwardConfig bc{100000, 1e-12};
  int stable = 0;
  for (int t = 0; t < 40; ++t) {
    FactorGraph g = structura::testing::random_graph(rng);
    auto scores = make_scores(g, structura::testing::normal_vector(rng, g.num_variables()));
    auto probe = reference::random_probe(g, rng);
    auto chk = reference::check_gradient(g, scores, tight(), bc, probe, 1e-4);
    if (!chk.converged || !chk.support_stable) continue;
    ++stable;
    CHECK(chk.relative_error <= 1e-3);
  }
  CHECK(stable >= 25);
}

TEST_CASE("jacobian without additionals is symmetric and a contraction") {
  std::mt19937_64 rng(321);
  BackwardConfig bc{100000, 1e-13};
  for (int t = 0; t < 30; ++t) {
    FactorGraph g;
    const std::size_t n = 3 + structura::testing::pick(rng, 4);
    g.add_variables(n);
    for (int f = 0; f < 3; ++f) {
      auto v = structura::testing::random_subset(rng, n, 2 + structura::testing::pick(rng, n - 1));
      g.attach_factor(structura::testing::random_logic_factor(rng, v));
    }
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;
    g.attach_factor(make_budget(all, static_cast<double>(n)));
    g.finalize();
    LpSparseMapSolution sol;
    try {
      sol = solve(g, make_scores(g, structura::testing::normal_vector(rng, n)), tight());
    } catch (const InvalidArgument&) {
      continue;
    }
    if (!sol.converged()) continue;
    Eigen::MatrixXd j = materialize_jacobian(g, sol, bc);
    CHECK((j - j.transpose()).cwiseAbs().maxCoeff() <= 1e-7);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (j + j.transpose()));
    CHECK(es.eigenvalues().minCoeff() >= -1e-7);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-7);
  }
}
