#include <doctest.h>

#include <cmath>
#include <random>

#include "structura/error.hpp"
#include "structura/graph.hpp"
#include "support.hpp"

using namespace structura;
using structura::testing::norm;

TEST_CASE("add_variables allocates contiguous ranges") {
  FactorGraph g;
  auto r = g.add_variables(3);
  CHECK(r.to_vector() == std::vector<std::size_t>{0, 1, 2});
  g.add_variables(2);
  auto s = g.add_variables(2);
  CHECK(s.first == 5);
  CHECK(s.size() == 2);
  CHECK_THROWS_AS(g.add_variables(0), InvalidArgument);
}

TEST_CASE("attach_factor validates parameters") {
  FactorGraph g;
  g.add_variables(5);
  CHECK(g.attach_factor(make_xor({0, 1, 2})) == 0);
  CHECK(g.factor(0).kind == FactorKind::Xor);
  CHECK(g.attach_factor(make_budget({0, 1, 2, 3, 4}, 5.0)) == 1);
  CHECK_THROWS_AS(g.attach_factor(make_knapsack({0, 1, 2}, {1.0, 2.0}, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(g.attach_factor(make_xor({0, 7})), InvalidArgument);
  CHECK_THROWS_AS(g.attach_factor(make_xor({0, 0})), InvalidArgument);
  CHECK_THROWS_AS(g.attach_factor(make_sequence({0, 1, 2}, 2)), InvalidArgument);
  CHECK_THROWS_AS(g.attach_factor(make_tree({0, 1, 2})), InvalidArgument);
}

TEST_CASE("finalize computes sqrt degrees") {
  SUBCASE("single factor") {
    FactorGraph g;
    g.add_variables(3);
    g.attach_factor(make_xor({0, 1, 2}));
    g.finalize();
    for (double d : g.delta()) CHECK(d == doctest::Approx(1.0));
  }
  SUBCASE("three factors share a variable") {
    FactorGraph g;
    g.add_variables(3);
    g.attach_factor(make_xor({0, 1}));
    g.attach_factor(make_or({0, 2}));
    g.attach_factor(make_at_most_one({0, 1, 2}));
    g.finalize();
    CHECK(g.delta()[0] == doctest::Approx(std::sqrt(3.0)));
    CHECK(g.delta()[1] == doctest::Approx(std::sqrt(2.0)));
    CHECK(g.delta()[2] == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("tree plus per-head budgets") {
    FactorGraph g;
    g.add_variables(9);
    g.attach_factor(make_tree({0, 1, 2, 3, 4, 5, 6, 7, 8}));
    for (std::size_t h = 0; h < 3; ++h) {
      g.attach_factor(make_budget({3 * h, 3 * h + 1, 3 * h + 2}, 2.0));
    }
    g.finalize();
    for (double d : g.delta()) CHECK(d == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("finalize rejects uncovered variables and freezes the graph") {
  FactorGraph g;
  g.add_variables(3);
  CHECK_THROWS_AS(g.finalize(), ValidationError);
  g.attach_factor(make_xor({0, 1}));
  CHECK_THROWS_AS(g.finalize(), ValidationError);
  g.attach_factor(make_or({2, 1}));
  g.finalize();
  g.finalize();
  CHECK(g.finalized());
  CHECK_THROWS(g.add_variables(1));
  CHECK_THROWS(g.attach_factor(make_xor({0, 1})));
}

TEST_CASE("scatter and gather") {
  SUBCASE("unit degrees are plain selection") {
    FactorGraph g;
    g.add_variables(3);
    g.attach_factor(make_xor({2, 0, 1}));
    g.finalize();
    std::vector<double> mu{0.1, 0.2, 0.3};
    auto s = g.scatter(mu);
    CHECK(s == std::vector<double>{0.3, 0.1, 0.2});
    CHECK(g.gather(s) == mu);
  }
  SUBCASE("two copies average with 1/delta") {
    FactorGraph g;
    g.add_variables(1);
    g.attach_factor(make_xor({0}));
    g.attach_factor(make_or({0}));
    g.finalize();
    std::vector<double> local{0.3, 0.9};
    auto mu = g.gather(local);
    CHECK(mu[0] == doctest::Approx(1.2 / std::sqrt(2.0)));
  }
}

TEST_CASE("scatter is an isometry and gather inverts it on random graphs") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    FactorGraph g = structura::testing::random_graph(rng);
    auto mu = structura::testing::normal_vector(rng, g.num_variables());
    auto s = g.scatter(mu);
    CHECK(s.size() == g.num_slots());
    CHECK(std::abs(norm(s) - norm(mu)) <= 1e-12);
    auto back = g.gather(s);
    CHECK(structura::testing::max_abs_diff(back, mu) <= 1e-12);
  }
}

TEST_CASE("local views follow factor order") {
  FactorGraph g;
  g.add_variables(4);
  g.attach_factor(make_xor({0, 1}));
  g.attach_factor(make_xor({1, 2, 3}));
  g.finalize();
  CHECK(g.slot_offset(1) == 2);
  std::vector<double> flat{1, 2, 3, 4, 5};
  auto v = g.local(std::span<double>(flat), 1);
  CHECK(v.size() == 3);
  CHECK(v[0] == 3);
  CHECK(g.slot_delta(1)[0] == doctest::Approx(std::sqrt(2.0)));
}
