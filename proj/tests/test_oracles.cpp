#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "structura/factors.hpp"
#include "structura/oracles.hpp"
#include "support.hpp"

using namespace structura;

namespace {

double brute_best(const std::vector<Structure>& all, std::span<const double> em,
                  std::span<const double> en) {
  double best = -INFINITY;
  for (const auto& s : all) best = std::max(best, structure_score(s, em, en));
  return best;
}

}  // namespace

TEST_CASE("enumeration oracle") {
  std::vector<Structure> xs{{{1, 0, 0}, {}, 0}, {{0, 1, 0}, {}, 0}, {{0, 0, 1}, {}, 0}};
  std::vector<double> eta{0.5, 0.3, 0.1};
  auto s = map_enumerate(xs, eta, {});
  CHECK(s.m == std::vector<double>{1, 0, 0});
  CHECK(s.score == doctest::Approx(0.5));

  std::vector<double> tie{0.2, 0.2, 0.1};
  CHECK(map_enumerate(xs, tie, {}).m == std::vector<double>{1, 0, 0});

  std::vector<Structure> seq{{{0, 1, 1}, {0, 1}, 0}, {{1, 1, 0}, {1, 0}, 0}};
  std::vector<double> eta_n{0.0, 1.0};
  auto q = map_enumerate(seq, std::vector<double>{0, 0, 0}, eta_n);
  CHECK(q.m == std::vector<double>{0, 1, 1});
  CHECK(q.n == std::vector<double>{0, 1});
}

TEST_CASE("viterbi") {
  Eigen::MatrixXd unary{{1, 0}, {0, 1}};
  Eigen::MatrixXd trans{{0, 2}, {0, 0}};
  auto s = map_viterbi(unary, trans);
  CHECK(s.m == std::vector<double>{1, 0, 0, 1});
  CHECK(s.score == doctest::Approx(4.0));
  CHECK(s.n == std::vector<double>{0, 1, 0, 0});

  auto z = map_viterbi(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3));
  CHECK(z.m == std::vector<double>{1, 0, 0, 1, 0, 0, 1, 0, 0});
  CHECK(z.score == doctest::Approx(0.0));
}

TEST_CASE("viterbi matches enumeration on random instances") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    std::size_t L = 2 + structura::testing::pick(rng, 3);
    std::size_t S = 2 + structura::testing::pick(rng, 2);
    std::vector<std::size_t> vars(L * S);
    std::iota(vars.begin(), vars.end(), 0);
    auto trans = structura::testing::normal_vector(rng, (L - 1) * S * S);
    auto att = make_sequence(vars, S, trans);
    auto all = enumerate_structures(att);
    auto em = structura::testing::normal_vector(rng, L * S);
    auto oracle = make_oracle(att);
    auto best = oracle(em, trans);
    CHECK(structure_score(best, em, trans) == doctest::Approx(brute_best(all, em, trans)));
    CHECK(is_valid_structure(att, best.m, best.n));
  }
}

TEST_CASE("arborescence") {
  Eigen::MatrixXd one(2, 1);
  one << 0.3, 0.0;
  auto s1 = map_arborescence(one);
  CHECK(s1.m == std::vector<double>{1});

  Eigen::MatrixXd a(3, 2);
  a << 0.5, 0.4,
       0.0, 0.9,
       0.1, 0.0;
  auto s = map_arborescence(a);
  // packed: (0,0) root->1, (0,1) 1->2
  CHECK(s.m == std::vector<double>{1, 1, 0, 0});
  CHECK(s.score == doctest::Approx(1.4));
}

TEST_CASE("arborescence matches enumeration on random instances") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    std::size_t m = 2 + structura::testing::pick(rng, 3);
    bool single = structura::testing::pick(rng, 2) == 1;
    std::vector<std::size_t> vars(m * m);
    std::iota(vars.begin(), vars.end(), 0);
    auto att = make_tree(vars, single);
    auto all = enumerate_structures(att);
    auto em = structura::testing::normal_vector(rng, m * m);
    auto best = make_oracle(att)(em, {});
    CHECK(structure_score(best, em, {}) == doctest::Approx(brute_best(all, em, {})));
    CHECK(is_valid_structure(att, best.m, best.n));
  }
}

TEST_CASE("assignment") {
  CHECK(map_assignment(Eigen::MatrixXd{{1, 0}, {0, 1}}).m == std::vector<double>{1, 0, 0, 1});
  auto anti = map_assignment(Eigen::MatrixXd{{0, 1}, {1, 0}});
  CHECK(anti.m == std::vector<double>{0, 1, 1, 0});
  CHECK(anti.score == doctest::Approx(2.0));
  auto d = map_assignment(Eigen::MatrixXd{{3, 1, 0}, {1, 3, 1}, {0, 1, 3}});
  CHECK(d.m == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(d.score == doctest::Approx(9.0));

  std::mt19937_64 rng(9);
  for (int t = 0; t < 40; ++t) {
    std::size_t n = 2 + structura::testing::pick(rng, 3);
    std::vector<std::size_t> vars(n * n);
    std::iota(vars.begin(), vars.end(), 0);
    auto att = make_assignment(vars);
    auto all = enumerate_structures(att);
    CHECK(all.size() == static_cast<std::size_t>(std::tgamma(n + 1) + 0.5));
    auto em = structura::testing::normal_vector(rng, n * n);
    auto best = make_oracle(att)(em, {});
    CHECK(structure_score(best, em, {}) == doctest::Approx(brute_best(all, em, {})));
  }
}

TEST_CASE("logic oracles match enumeration") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 300; ++t) {
    std::size_t d = 2 + structura::testing::pick(rng, 5);
    std::vector<std::size_t> vars(d);
    std::iota(vars.begin(), vars.end(), 0);
    auto att = structura::testing::random_logic_factor(rng, vars);
    auto all = enumerate_structures(att);
    auto em = structura::testing::normal_vector(rng, d);
    auto best = make_oracle(att)(em, {});
    CHECK(structure_score(best, em, {}) == doctest::Approx(brute_best(all, em, {})).epsilon(1e-9));
  }
}

TEST_CASE("pair oracle and implied additionals") {
  auto att = make_pair(0, 1, 0.5);
  auto all = enumerate_structures(att);
  CHECK(all.size() == 4);
  for (const auto& s : all) {
    CHECK(implied_additionals(att, s.m) == s.n);
    CHECK(is_valid_structure(att, s.m, s.n));
  }
  std::vector<double> em{-0.1, -0.1};
  std::vector<double> en{0.5};
  auto best = make_oracle(att)(em, en);
  CHECK(best.m == std::vector<double>{1, 1});
  CHECK(best.n == std::vector<double>{1});
  CHECK_FALSE(is_valid_structure(att, std::vector<double>{1, 1}, std::vector<double>{0}));
}
