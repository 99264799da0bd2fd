#include <doctest.h>

#include <optional>
#include <random>

#include "structura/admm.hpp"
#include "structura/error.hpp"
#include "structura/factors.hpp"
#include "structura/loss.hpp"
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

// Gold assignment from a random feasible 0/1 structure per factor, or
// nullopt when random structures disagree on shared variables.
std::optional<GoldAssignment> random_gold(const FactorGraph& g, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<double> y(g.num_variables());
    for (double& x : y) x = static_cast<double>(structura::testing::pick(rng, 2));
    try {
      auto gold = GoldAssignment::from_global(g, y);
      validate_gold(g, gold);
      return gold;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("xor examples") {
  auto g = xor3();
  auto gold = GoldAssignment::from_global(g, std::vector<double>{1, 0, 0});
  auto r = evaluate_loss(g, make_scores(g, {0.5, 0.3, 0.1}), gold, tight());
  CHECK(r.exact);
  CHECK(r.value == doctest::Approx(0.17333333333333).epsilon(1e-12));
  CHECK(max_abs_diff(r.grad.eta_m, std::vector<double>{-7.0 / 15, 1.0 / 3, 2.0 / 15}) <= 1e-12);

  auto at = evaluate_loss(g, make_scores(g, {10, 0, 0}), gold);
  CHECK(std::abs(at.value) <= 1e-12);
  CHECK(max_abs_diff(at.grad.eta_m, std::vector<double>{0, 0, 0}) <= 1e-12);

  auto zero = evaluate_loss(g, make_scores(g, {0, 0, 0}), gold);
  CHECK(zero.value == doctest::Approx(0.5 * (1.0 - 1.0 / 3)));
}

TEST_CASE("gold validation") {
  FactorGraph g;
  g.add_variables(3);
  g.attach_factor(make_xor({0, 1}));
  g.attach_factor(make_xor({1, 2}));
  g.finalize();
  CHECK_THROWS_AS(validate_gold(g, GoldAssignment::from_global(g, std::vector<double>{1, 1, 0})),
                  ValidationError);
  CHECK_NOTHROW(validate_gold(g, GoldAssignment::from_global(g, std::vector<double>{1, 0, 1})));
  CHECK_THROWS_AS(GoldAssignment::from_factors(g, {{1, 0}, {1, 0}}, {{}, {}}), ValidationError);
  auto ok = GoldAssignment::from_factors(g, {{0, 1}, {1, 0}}, {{}, {}});
  CHECK(ok.global == std::vector<double>{0, 1, 0});
  CHECK_THROWS(GoldAssignment::from_global(g, std::vector<double>{1, 0}));
}

TEST_CASE("nonnegativity, convexity and gradients on random triples") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    FactorGraph g = structura::testing::random_graph(rng, 6, 3);
    auto gold = random_gold(g, rng);
    if (!gold) continue;
    auto s1 = make_scores(g, structura::testing::normal_vector(rng, g.num_variables()));
    auto s2 = make_scores(g, structura::testing::normal_vector(rng, g.num_variables()));
    LossResult r1, r2;
    try {
      r1 = evaluate_loss(g, s1, *gold, tight());
      r2 = evaluate_loss(g, s2, *gold, tight());
    } catch (const InvalidArgument&) {
      continue;
    }
    if (!r1.exact || !r2.exact) continue;
    ++checked;
    CHECK(r1.value >= -1e-8);
    Scores mid = s1;
    for (std::size_t j = 0; j < mid.eta_m.size(); ++j) mid.eta_m[j] = 0.5 * (s1.eta_m[j] + s2.eta_m[j]);
    CHECK(loss_value(g, mid, *gold, tight()) <= 0.5 * (r1.value + r2.value) + 1e-8);

    auto v = structura::testing::normal_vector(rng, g.num_variables());
    const double h = 1e-5;
    Scores plus = s1, minus = s1;
    for (std::size_t j = 0; j < v.size(); ++j) {
      plus.eta_m[j] += h * v[j];
      minus.eta_m[j] -= h * v[j];
    }
    double fd = (loss_value(g, plus, *gold, tight()) - loss_value(g, minus, *gold, tight())) / (2 * h);
    double an = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) an += r1.grad.eta_m[j] * v[j];
    CHECK(reference::relative_error(an, fd) <= 1e-3);
  }
  CHECK(checked >= 30);
}
