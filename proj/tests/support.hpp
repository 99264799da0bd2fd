#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "structura/graph.hpp"

namespace structura::testing {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

inline double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n,
                                         double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo,
                                          double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::vector<std::size_t> random_subset(std::mt19937_64& rng, std::size_t n,
                                              std::size_t k) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  return all;
}

// Random logic attachment (xor, or, atmostone, budget, knapsack, orout,
// negated) over the given variables.
inline FactorAttachment random_logic_factor(std::mt19937_64& rng,
                                            std::vector<std::size_t> vars) {
  const std::size_t d = vars.size();
  std::size_t kind = pick(rng, d >= 2 ? 7 : 5);
  switch (kind) {
    case 0: return make_xor(std::move(vars));
    case 1: return make_or(std::move(vars));
    case 2: return make_at_most_one(std::move(vars));
    case 3: {
      std::uniform_real_distribution<double> b(0.5, std::max(0.6, d - 0.5));
      return make_budget(std::move(vars), b(rng));
    }
    case 4: {
      std::vector<double> c = uniform_vector(rng, d, 0.2, 2.0);
      std::uniform_real_distribution<double> b(0.3, 2.0);
      return make_knapsack(std::move(vars), std::move(c), b(rng));
    }
    case 5: return make_or_out(std::move(vars));
    default: {
      std::vector<bool> mask(d);
      for (std::size_t k = 0; k < d; ++k) mask[k] = pick(rng, 2) == 1;
      FactorAttachment inner;
      switch (pick(rng, 4)) {
        case 0: inner = make_xor({}); break;
        case 1: inner = make_or({}); break;
        case 2: inner = make_at_most_one({}); break;
        default: inner = make_or_out({}); break;
      }
      return make_negated(std::move(vars), std::move(mask), inner);
    }
  }
}

// Random small graph (<= max_vars variables, 1..max_factors factors) mixing
// closed-form kinds with oracle-backed ones (pair, sequence, dense, tree,
// assignment). Every variable is covered.
inline FactorGraph random_graph(std::mt19937_64& rng, std::size_t max_vars = 8,
                                std::size_t max_factors = 3) {
  const std::size_t n = 2 + pick(rng, max_vars - 1);
  const std::size_t nf = 1 + pick(rng, max_factors);
  FactorGraph g;
  g.add_variables(n);
  std::vector<bool> covered(n, false);
  auto cover = [&](const std::vector<std::size_t>& vars) {
    for (std::size_t j : vars) covered[j] = true;
  };
  for (std::size_t f = 0; f + 1 < nf; ++f) {
    std::size_t kind = pick(rng, 6);
    if (kind == 0) {
      auto v = random_subset(rng, n, 2);
      FactorAttachment att = pick(rng, 2) == 0
                                 ? make_pair(v[0], v[1], normal_vector(rng, 1)[0])
                                 : make_pair_joint(v[0], v[1], normal_vector(rng, 4, 0.5));
      cover(att.variables);
      g.attach_factor(std::move(att));
    } else if (kind == 1 && n >= 4) {
      std::size_t states = 2;
      std::size_t len = 2 + pick(rng, std::min<std::size_t>(n / 2, 3) - 1);
      auto v = random_subset(rng, n, len * states);
      std::vector<double> trans;
      std::size_t mode = pick(rng, 3);
      if (mode == 1) trans = normal_vector(rng, states * states, 0.5);
      if (mode == 2) trans = normal_vector(rng, (len - 1) * states * states, 0.5);
      cover(v);
      g.attach_factor(make_sequence(std::move(v), states, std::move(trans)));
    } else if (kind == 2) {
      std::size_t d = 2 + pick(rng, std::min<std::size_t>(n, 4) - 1);
      auto v = random_subset(rng, n, d);
      std::size_t count = 2 + pick(rng, 4);
      std::vector<std::vector<double>> structs, adds;
      bool with_add = pick(rng, 2) == 0;
      for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> m(d);
        for (double& x : m) x = static_cast<double>(pick(rng, 2));
        structs.push_back(std::move(m));
        if (with_add) adds.push_back({static_cast<double>(pick(rng, 2)), static_cast<double>(pick(rng, 2))});
      }
      std::vector<double> eta_add;
      if (with_add) eta_add = normal_vector(rng, 2, 0.5);
      cover(v);
      g.attach_factor(make_dense(std::move(v), std::move(structs), std::move(adds), std::move(eta_add)));
    } else if (kind == 3 && n >= 4) {
      auto v = random_subset(rng, n, 4);
      cover(v);
      g.attach_factor(pick(rng, 2) == 0 ? make_tree(std::move(v)) : make_assignment(std::move(v)));
    } else {
      std::size_t d = 2 + pick(rng, std::min<std::size_t>(n, 5) - 1);
      auto v = random_subset(rng, n, d);
      cover(v);
      g.attach_factor(random_logic_factor(rng, std::move(v)));
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < n; ++j) {
    if (!covered[j]) rest.push_back(j);
  }
  if (rest.size() < 2) {
    for (std::size_t j : random_subset(rng, n, n)) {
      if (rest.size() >= 2) break;
      if (std::find(rest.begin(), rest.end(), j) == rest.end()) rest.push_back(j);
    }
  }
  g.attach_factor(random_logic_factor(rng, std::move(rest)));
  g.finalize();
  return g;
}

}  // namespace structura::testing
