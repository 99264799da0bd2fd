#include <doctest.h>

#include <random>

#include "structura/error.hpp"
#include "structura/factors.hpp"
#include "structura/reference.hpp"
#include "support.hpp"

using namespace structura;
using structura::testing::max_abs_diff;

TEST_CASE("brute force sparsemap") {
  std::vector<Structure> xs{{{1, 0, 0}, {}, 0}, {{0, 1, 0}, {}, 0}, {{0, 0, 1}, {}, 0}};
  std::vector<double> delta{1, 1, 1};
  auto r = reference::brute_force_sparsemap(xs, std::vector<double>{0.5, 0.3, 0.1}, {}, delta);
  CHECK(max_abs_diff(r.mu, std::vector<double>{8.0 / 15, 1.0 / 3, 2.0 / 15}) <= 1e-12);

  std::vector<Structure> one{{{1, 0}, {}, 0}};
  std::vector<double> d2{1, 1};
  auto s = reference::brute_force_sparsemap(one, std::vector<double>{-2, 4}, {}, d2);
  CHECK(s.mu == std::vector<double>{1, 0});
  CHECK(s.p == std::vector<double>{1});

  std::vector<Structure> many(21, Structure{{1}, {}, 0});
  std::vector<double> d1{1};
  CHECK_THROWS_AS(reference::brute_force_sparsemap(many, std::vector<double>{0}, {}, d1),
                  InvalidArgument);
}

TEST_CASE("polytope projection") {
  reference::Polytope box;
  box.lower = {0, 0};
  box.upper = {1, 1};
  box.num_quadratic = 2;
  CHECK(reference::project_polytope(box, std::vector<double>{-1, 0.4}) ==
        std::vector<double>{0, 0.4});

  std::vector<double> ones{1, 1, 1};
  auto pair = reference::factor_polytope(make_pair(0, 1, 0.0), std::vector<double>{1, 1});
  auto p = reference::project_polytope(pair, std::vector<double>{0.2, 0.3, 0.5});
  // the QP with the linear nu term differs from the projection; solve it
  auto pg = reference::projected_gradient_qp(
      [&](std::span<const double> x) { return reference::project_polytope(pair, x); },
      std::vector<double>{0.2, 0.3, 0.5}, 2);
  CHECK(max_abs_diff(pg.x, std::vector<double>{0.5, 0.5, 0.5}) <= 1e-8);
  CHECK(p.size() == 3);

  auto orout = reference::factor_polytope(make_or_out({0, 1, 2}), ones);
  auto q = reference::projected_gradient_qp(
      [&](std::span<const double> x) { return reference::project_polytope(orout, x); },
      std::vector<double>{0.3, 0.4, 0.8}, 3);
  CHECK(q.converged);
  CHECK(max_abs_diff(q.x, std::vector<double>{1.0 / 3, 1.3 / 3, 2.3 / 3}) <= 1e-8);

  reference::Polytope empty;
  empty.lower = {0};
  empty.upper = {1};
  empty.constraints.push_back({{1}, 2, true});
  CHECK_THROWS_AS(reference::project_polytope(empty, std::vector<double>{0.5}),
                  SolverError);
}

TEST_CASE("finite differences") {
  auto linear = [](std::span<const double> x) {
    return std::vector<double>{2 * x[0] - x[1], 3 * x[1]};
  };
  std::vector<double> eta{0.3, -1};
  std::vector<double> v{1, 2};
  std::vector<double> d{1, 1};
  for (double h : {1e-1, 1e-4, 1.0}) {
    CHECK(reference::finite_difference_jvp(linear, eta, v, d, h) == doctest::Approx(6.0));
  }
  auto constant = [](std::span<const double>) { return std::vector<double>{1, 0}; };
  CHECK(reference::finite_difference_jvp(constant, eta, v, d, 1e-3) == 0.0);
}

TEST_CASE("relative error") {
  CHECK(reference::relative_error(1.0, 1.0) == 0.0);
  CHECK(reference::relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(reference::relative_error(1e-9, 0.0) == doctest::Approx(1e-7));
  CHECK(reference::relative_error(1e-9, 0.0, 1e-9) == doctest::Approx(1.0));
}

TEST_CASE("random probes are unit norm") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto g = structura::testing::random_graph(rng);
    auto pr = reference::random_probe(g, rng);
    double vv = 0.0;
    for (double x : pr.v_m) vv += x * x;
    for (const auto& vn : pr.v_n) {
      for (double x : vn) vv += x * x;
    }
    CHECK(vv == doctest::Approx(1.0));
    CHECK(structura::testing::norm(pr.d) == doctest::Approx(1.0));
    CHECK(pr.v_n.size() == g.num_factors());
  }
}
