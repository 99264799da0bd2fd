#include "structura/factors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "structura/error.hpp"

namespace structura {

namespace {

std::size_t square_side(std::size_t d) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  return r;
}

Structure scored(std::vector<double> m, std::vector<double> n, std::span<const double> eta_m,
                 std::span<const double> eta_n) {
  Structure s{std::move(m), std::move(n), 0.0};
  s.score = structure_score(s, eta_m, eta_n);
  return s;
}

std::vector<double> unit(std::size_t d, std::size_t k) {
  std::vector<double> e(d, 0.0);
  e[k] = 1.0;
  return e;
}

std::vector<double> costs_of(const FactorAttachment& att, std::size_t d) {
  if (att.kind == FactorKind::Knapsack) return att.costs;
  return std::vector<double>(d, 1.0);
}

// Maximizes <s, x> over x in [0,1]^d with c^T x <= B; returns a vertex.
std::vector<double> greedy_knapsack(std::span<const double> s, std::span<const double> c,
                                    double budget) {
  const std::size_t d = s.size();
  std::vector<double> x(d, 0.0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < d; ++i) {
    if (s[i] <= 0.0) continue;
    if (c[i] == 0.0) {
      x[i] = 1.0;
    } else {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s[a] / c[a] > s[b] / c[b];
  });
  double remaining = budget;
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    double take = std::min(1.0, remaining / c[i]);
    x[i] = take;
    remaining -= take * c[i];
  }
  return x;
}

std::vector<double> sequence_additionals(std::size_t len, std::size_t ns, std::size_t arity,
                                         const std::vector<std::size_t>& path) {
  std::vector<double> n(arity, 0.0);
  if (arity == 0) return n;
  const bool shared = arity == ns * ns && len != 2;
  for (std::size_t i = 0; i + 1 < len; ++i) {
    std::size_t cell = path[i] * ns + path[i + 1];
    if (shared) {
      n[cell] += 1.0;
    } else {
      n[i * ns * ns + cell] = 1.0;
    }
  }
  return n;
}

Structure sequence_oracle(const FactorAttachment& att, std::span<const double> eta_m,
                          std::span<const double> eta_n) {
  const std::size_t ns = att.num_states;
  const std::size_t len = eta_m.size() / ns;
  Eigen::MatrixXd unary(len, ns);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t s = 0; s < ns; ++s) unary(i, s) = eta_m[i * ns + s];
  }
  std::vector<Eigen::MatrixXd> grids(len > 0 ? len - 1 : 0,
                                     Eigen::MatrixXd::Zero(ns, ns));
  const bool shared = eta_n.size() == ns * ns && len != 2;
  for (std::size_t i = 0; i + 1 < len && !eta_n.empty(); ++i) {
    const std::size_t base = shared ? 0 : i * ns * ns;
    for (std::size_t a = 0; a < ns; ++a) {
      for (std::size_t b = 0; b < ns; ++b) grids[i](a, b) = eta_n[base + a * ns + b];
    }
  }
  Structure s = map_viterbi(unary, grids);
  std::vector<std::size_t> path(len);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < ns; ++k) {
      if (s.m[i * ns + k] > 0.5) path[i] = k;
    }
  }
  return scored(std::move(s.m), sequence_additionals(len, ns, eta_n.size(), path), eta_m,
                eta_n);
}

Structure tree_oracle(const FactorAttachment& att, std::span<const double> eta_m) {
  const std::size_t words = square_side(eta_m.size());
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(words + 1, words);
  for (std::size_t h = 0; h < words; ++h) {
    for (std::size_t c = 0; c < words; ++c) {
      double v = eta_m[h * words + c];
      if (h == c) grid(0, c) = v; else grid(h + 1, c) = v;
    }
  }
  return map_arborescence(grid, att.single_root);
}

Structure logic_oracle(const FactorAttachment& att, std::span<const double> s,
                       std::span<const double> eta_n) {
  const std::size_t d = s.size();
  switch (att.kind) {
    case FactorKind::Xor: {
      std::size_t k = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
      return scored(unit(d, k), {}, s, eta_n);
    }
    case FactorKind::Or: {
      std::vector<double> m(d, 0.0);
      bool any = false;
      for (std::size_t i = 0; i < d; ++i) {
        if (s[i] > 0.0) {
          m[i] = 1.0;
          any = true;
        }
      }
      if (!any) m[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())] = 1.0;
      return scored(std::move(m), {}, s, eta_n);
    }
    case FactorKind::AtMostOne:
    case FactorKind::Budget:
    case FactorKind::Knapsack: {
      const double budget = att.kind == FactorKind::AtMostOne ? 1.0 : att.budget;
      std::vector<double> c = costs_of(att, d);
      return scored(greedy_knapsack(s, c, budget), {}, s, eta_n);
    }
    case FactorKind::OrOut: {
      const std::size_t out = d - 1;
      std::vector<double> on(d, 0.0);
      on[out] = 1.0;
      double value = s[out];
      bool any = false;
      for (std::size_t i = 0; i < out; ++i) {
        if (s[i] > 0.0) {
          on[i] = 1.0;
          value += s[i];
          any = true;
        }
      }
      if (!any) {
        std::size_t k = static_cast<std::size_t>(
            std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(out)) -
            s.begin());
        on[k] = 1.0;
        value += s[k];
      }
      if (value > 0.0) return scored(std::move(on), {}, s, eta_n);
      return scored(std::vector<double>(d, 0.0), {}, s, eta_n);
    }
    default:
      break;
  }
  throw InvalidArgument("logic oracle: unsupported kind " + std::string(to_string(att.kind)));
}

void require_degree(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(want) +
                          " entries, got " + std::to_string(got));
  }
}

Structure oracle_impl(const FactorAttachment& att, std::span<const double> eta_m,
                      std::span<const double> eta_n) {
  const std::size_t d = eta_m.size();
  switch (att.kind) {
    case FactorKind::Xor:
    case FactorKind::Or:
    case FactorKind::AtMostOne:
    case FactorKind::Budget:
    case FactorKind::Knapsack:
    case FactorKind::OrOut:
      return logic_oracle(att, eta_m, eta_n);
    case FactorKind::Pair: {
      Structure best;
      for (int x1 = 0; x1 <= 1; ++x1) {
        for (int x2 = 0; x2 <= 1; ++x2) {
          std::vector<double> n;
          if (eta_n.size() == 1) {
            n = {static_cast<double>(x1 * x2)};
          } else {
            n = unit(4, static_cast<std::size_t>(2 * x1 + x2));
          }
          Structure s = scored({double(x1), double(x2)}, std::move(n), eta_m, eta_n);
          if ((x1 == 0 && x2 == 0) || s.score > best.score) best = std::move(s);
        }
      }
      return best;
    }
    case FactorKind::Negated: {
      const auto& mask = att.negation_mask;
      std::vector<double> flipped(eta_m.begin(), eta_m.end());
      for (std::size_t k = 0; k < d; ++k) {
        if (mask[k]) flipped[k] = -flipped[k];
      }
      Structure inner = oracle_impl(*att.inner, flipped, {});
      for (std::size_t k = 0; k < d; ++k) {
        if (mask[k]) inner.m[k] = 1.0 - inner.m[k];
      }
      return scored(std::move(inner.m), {}, eta_m, eta_n);
    }
    case FactorKind::Sequence:
      return sequence_oracle(att, eta_m, eta_n);
    case FactorKind::Tree:
      return tree_oracle(att, eta_m);
    case FactorKind::Assignment: {
      const std::size_t side = square_side(d);
      Eigen::MatrixXd grid(side, side);
      for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) grid(i, j) = eta_m[i * side + j];
      }
      return map_assignment(grid);
    }
    case FactorKind::Dense: {
      std::vector<Structure> list;
      list.reserve(att.structures.size());
      for (std::size_t k = 0; k < att.structures.size(); ++k) {
        Structure s;
        s.m = att.structures[k];
        if (!att.additionals.empty()) s.n = att.additionals[k];
        list.push_back(std::move(s));
      }
      return map_enumerate(list, eta_m, eta_n);
    }
  }
  throw InvalidArgument("oracle: unknown factor kind");
}

std::vector<std::vector<double>> binary_patterns(std::size_t d, std::size_t limit) {
  if (d >= 31 || (std::size_t{1} << d) > limit) {
    throw InvalidArgument("enumerate_structures: too many structures");
  }
  std::vector<std::vector<double>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = static_cast<double>((mask >> i) & 1U);
    out.push_back(std::move(x));
  }
  return out;
}

bool is_arborescence(const std::vector<std::size_t>& head, bool single_root) {
  // head[c] == words means the root.
  const std::size_t words = head.size();
  std::size_t roots = 0;
  for (std::size_t c = 0; c < words; ++c) {
    if (head[c] == c) return false;
    if (head[c] == words) ++roots;
  }
  if (roots == 0 || (single_root && roots != 1)) return false;
  for (std::size_t c = 0; c < words; ++c) {
    std::size_t v = c;
    for (std::size_t steps = 0; v != words; ++steps) {
      if (steps > words) return false;
      v = head[v];
    }
  }
  return true;
}

std::vector<Structure> enumerate_impl(const FactorAttachment& att, std::size_t d,
                                      std::size_t limit) {
  std::vector<Structure> out;
  auto push = [&](std::vector<double> m, std::vector<double> n) {
    if (out.size() >= limit) throw InvalidArgument("enumerate_structures: too many structures");
    out.push_back(Structure{std::move(m), std::move(n), 0.0});
  };
  switch (att.kind) {
    case FactorKind::Xor:
      for (std::size_t k = 0; k < d; ++k) push(unit(d, k), {});
      break;
    case FactorKind::Or:
      for (auto& x : binary_patterns(d, limit)) {
        if (std::accumulate(x.begin(), x.end(), 0.0) >= 1.0) push(std::move(x), {});
      }
      break;
    case FactorKind::AtMostOne:
      push(std::vector<double>(d, 0.0), {});
      for (std::size_t k = 0; k < d; ++k) push(unit(d, k), {});
      break;
    case FactorKind::Budget:
    case FactorKind::Knapsack: {
      const std::vector<double> c = costs_of(att, d);
      const double tol = 1e-12 * (1.0 + att.budget);
      auto load = [&](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += c[i] * x[i];
        return s;
      };
      auto patterns = binary_patterns(d, limit);
      for (const auto& x : patterns) {
        if (load(x) <= att.budget + tol) push(x, {});
      }
      for (std::size_t k = 0; k < d; ++k) {
        if (c[k] <= 0.0) continue;
        for (const auto& x : patterns) {
          if (x[k] != 0.0) continue;
          double frac = (att.budget - load(x)) / c[k];
          if (frac > tol && frac < 1.0 - tol) {
            std::vector<double> v = x;
            v[k] = frac;
            push(std::move(v), {});
          }
        }
      }
      break;
    }
    case FactorKind::OrOut:
      for (auto& x : binary_patterns(d - 1, limit)) {
        double any = *std::max_element(x.begin(), x.end());
        x.push_back(any);
        push(std::move(x), {});
      }
      break;
    case FactorKind::Pair:
      for (int x1 = 0; x1 <= 1; ++x1) {
        for (int x2 = 0; x2 <= 1; ++x2) {
          std::vector<double> n = att.additional_scores.size() == 1
                                      ? std::vector<double>{double(x1 * x2)}
                                      : unit(4, static_cast<std::size_t>(2 * x1 + x2));
          push({double(x1), double(x2)}, std::move(n));
        }
      }
      break;
    case FactorKind::Negated:
      for (auto& s : enumerate_impl(*att.inner, d, limit)) {
        for (std::size_t k = 0; k < d; ++k) {
          if (att.negation_mask[k]) s.m[k] = 1.0 - s.m[k];
        }
        push(std::move(s.m), {});
      }
      break;
    case FactorKind::Sequence: {
      const std::size_t ns = att.num_states;
      const std::size_t len = d / ns;
      const std::size_t arity = att.additional_scores.size();
      std::vector<std::size_t> path(len, 0);
      while (true) {
        std::vector<double> m(d, 0.0);
        for (std::size_t i = 0; i < len; ++i) m[i * ns + path[i]] = 1.0;
        push(std::move(m), sequence_additionals(len, ns, arity, path));
        std::size_t i = len;
        while (i > 0 && ++path[i - 1] == ns) path[--i] = 0;
        if (i == 0) break;
      }
      break;
    }
    case FactorKind::Tree: {
      const std::size_t words = square_side(d);
      std::vector<std::size_t> head(words, 0);
      while (true) {
        if (is_arborescence(head, att.single_root)) {
          std::vector<double> m(d, 0.0);
          for (std::size_t c = 0; c < words; ++c) {
            m[head[c] == words ? c * words + c : head[c] * words + c] = 1.0;
          }
          push(std::move(m), {});
        }
        std::size_t i = words;
        while (i > 0 && ++head[i - 1] == words + 1) head[--i] = 0;
        if (i == 0) break;
      }
      break;
    }
    case FactorKind::Assignment: {
      const std::size_t side = square_side(d);
      std::vector<std::size_t> perm(side);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        std::vector<double> m(d, 0.0);
        for (std::size_t i = 0; i < side; ++i) m[i * side + perm[i]] = 1.0;
        push(std::move(m), {});
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case FactorKind::Dense:
      for (std::size_t k = 0; k < att.structures.size(); ++k) {
        push(att.structures[k],
             att.additionals.empty() ? std::vector<double>{} : att.additionals[k]);
      }
      break;
  }
  return out;
}

bool binary(std::span<const double> m) {
  return std::all_of(m.begin(), m.end(), [](double x) { return x == 0.0 || x == 1.0; });
}

bool valid_impl(const FactorAttachment& att, std::span<const double> m) {
  const std::size_t d = m.size();
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  switch (att.kind) {
    case FactorKind::Xor: return total == 1.0;
    case FactorKind::Or: return total >= 1.0;
    case FactorKind::AtMostOne: return total <= 1.0;
    case FactorKind::Budget: return total <= att.budget + 1e-12;
    case FactorKind::Knapsack: {
      double load = 0.0;
      for (std::size_t i = 0; i < d; ++i) load += att.costs[i] * m[i];
      return load <= att.budget + 1e-12;
    }
    case FactorKind::OrOut: {
      double any = *std::max_element(m.begin(), m.end() - 1);
      return m[d - 1] == any;
    }
    case FactorKind::Pair: return true;
    case FactorKind::Negated: {
      std::vector<double> flipped(m.begin(), m.end());
      for (std::size_t k = 0; k < d; ++k) {
        if (att.negation_mask[k]) flipped[k] = 1.0 - flipped[k];
      }
      return valid_impl(*att.inner, flipped);
    }
    case FactorKind::Sequence: {
      const std::size_t ns = att.num_states;
      for (std::size_t i = 0; i < d / ns; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < ns; ++k) s += m[i * ns + k];
        if (s != 1.0) return false;
      }
      return true;
    }
    case FactorKind::Tree: {
      const std::size_t words = square_side(d);
      std::vector<std::size_t> head(words, words + 1);
      for (std::size_t h = 0; h < words; ++h) {
        for (std::size_t c = 0; c < words; ++c) {
          if (m[h * words + c] != 1.0) continue;
          if (head[c] != words + 1) return false;
          head[c] = h == c ? words : h;
        }
      }
      for (std::size_t c = 0; c < words; ++c) {
        if (head[c] == words + 1) return false;
      }
      return is_arborescence(head, att.single_root);
    }
    case FactorKind::Assignment: {
      const std::size_t side = square_side(d);
      for (std::size_t i = 0; i < side; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < side; ++j) {
          row += m[i * side + j];
          col += m[j * side + i];
        }
        if (row != 1.0 || col != 1.0) return false;
      }
      return true;
    }
    case FactorKind::Dense:
      return std::any_of(att.structures.begin(), att.structures.end(),
                         [&](const std::vector<double>& s) {
                           return std::equal(s.begin(), s.end(), m.begin(), m.end());
                         });
  }
  return false;
}

ClosedFormResult closed_form_impl(const FactorAttachment& att, std::span<const double> eta_m,
                                  std::span<const double> eta_n,
                                  std::span<const double> delta) {
  switch (att.kind) {
    case FactorKind::Xor: return solve_xor(eta_m, delta);
    case FactorKind::Or: return solve_or(eta_m, delta);
    case FactorKind::AtMostOne: return solve_at_most_one(eta_m, delta);
    case FactorKind::Budget: return solve_budget(eta_m, delta, att.budget);
    case FactorKind::Knapsack: return solve_knapsack(eta_m, delta, att.costs, att.budget);
    case FactorKind::OrOut: return solve_orout(eta_m, delta);
    case FactorKind::Negated:
      return apply_negation(
          [&](std::span<const double> e, std::span<const double> dl) {
            return closed_form_impl(*att.inner, e, {}, dl);
          },
          att.negation_mask, eta_m, delta);
    case FactorKind::Pair: {
      const double d1 = delta[0], d2 = delta[1];
      if (eta_n.size() == 1) return solve_pair(eta_m[0], eta_m[1], eta_n[0], d1, d2);
      const double ff = eta_n[0], ft = eta_n[1], tf = eta_n[2], tt = eta_n[3];
      ClosedFormResult r = solve_pair(eta_m[0] + d1 * (tf - ff), eta_m[1] + d2 * (ft - ff),
                                      ff - ft - tf + tt, d1, d2);
      const double nu1 = d1 * r.mu[0], nu2 = d2 * r.mu[1], nu12 = r.nu[0];
      r.nu = {1.0 - nu1 - nu2 + nu12, nu2 - nu12, nu1 - nu12, nu12};
      return r;
    }
    default:
      break;
  }
  throw InvalidArgument("no closed form for factor kind " + std::string(to_string(att.kind)));
}

}  // namespace

std::size_t additional_arity(const FactorAttachment& att) {
  switch (att.kind) {
    case FactorKind::Pair:
    case FactorKind::Sequence:
    case FactorKind::Dense:
      return att.additional_scores.size();
    default:
      return 0;
  }
}

MapOracle make_oracle(const FactorAttachment& att) {
  auto shared = std::make_shared<const FactorAttachment>(att);
  return [shared](std::span<const double> eta_m, std::span<const double> eta_n) {
    return oracle_impl(*shared, eta_m, eta_n);
  };
}

std::vector<Structure> enumerate_structures(const FactorAttachment& att, std::size_t limit) {
  return enumerate_impl(att, att.degree(), limit);
}

std::vector<double> implied_additionals(const FactorAttachment& att,
                                        std::span<const double> m) {
  require_degree(m.size(), att.degree(), "implied_additionals");
  switch (att.kind) {
    case FactorKind::Pair:
      if (att.additional_scores.size() == 1) return {m[0] * m[1]};
      return unit(4, static_cast<std::size_t>(2 * m[0] + m[1]));
    case FactorKind::Sequence: {
      const std::size_t ns = att.num_states;
      const std::size_t len = m.size() / ns;
      std::vector<std::size_t> path(len, 0);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t k = 0; k < ns; ++k) {
          if (m[i * ns + k] > 0.5) path[i] = k;
        }
      }
      return sequence_additionals(len, ns, att.additional_scores.size(), path);
    }
    case FactorKind::Dense:
      for (std::size_t k = 0; k < att.structures.size(); ++k) {
        const auto& s = att.structures[k];
        if (std::equal(s.begin(), s.end(), m.begin(), m.end())) {
          return att.additionals.empty() ? std::vector<double>{} : att.additionals[k];
        }
      }
      throw ValidationError("assignment is not one of the dense factor's structures");
    default:
      return {};
  }
}

bool is_valid_structure(const FactorAttachment& att, std::span<const double> m,
                        std::span<const double> n) {
  if (m.size() != att.degree() || n.size() != additional_arity(att)) return false;
  if (!binary(m) || !valid_impl(att, m)) return false;
  if (att.kind == FactorKind::Dense) {
    for (std::size_t k = 0; k < att.structures.size(); ++k) {
      const auto& s = att.structures[k];
      if (!std::equal(s.begin(), s.end(), m.begin(), m.end())) continue;
      if (att.additionals.empty() ||
          std::equal(n.begin(), n.end(), att.additionals[k].begin(), att.additionals[k].end())) {
        return true;
      }
    }
    return false;
  }
  std::vector<double> want = implied_additionals(att, m);
  return std::equal(n.begin(), n.end(), want.begin(), want.end());
}

LocalSolution solve_local(const FactorAttachment& att, std::span<const double> eta_m,
                          std::span<const double> eta_n, std::span<const double> delta,
                          const SparseMapConfig& cfg, bool force_generic,
                          const LocalSolution* warm) {
  require_degree(eta_m.size(), att.degree(), "factor scores");
  require_degree(delta.size(), att.degree(), "factor delta");
  require_degree(eta_n.size(), additional_arity(att), "factor additional scores");

  LocalSolution out;
  if (has_closed_form(att.kind) && !force_generic) {
    ClosedFormResult r = closed_form_impl(att, eta_m, eta_n, delta);
    out.mu = std::move(r.mu);
    out.nu = std::move(r.nu);
    out.detail = std::move(r.cert);
    return out;
  }
  const ActiveSetState* state = nullptr;
  if (warm != nullptr) {
    if (const auto* prev = std::get_if<SparseMapSolution>(&warm->detail)) state = &prev->state;
  }
  SparseMapSolution sol = solve_sparsemap(make_oracle(att), eta_m, eta_n, delta, cfg, state);
  out.mu = sol.mu;
  out.nu = sol.nu;
  out.converged = sol.converged;
  out.detail = std::move(sol);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> local_vjp(const FactorAttachment& att,
                                                              const LocalSolution& sol,
                                                              std::span<const double> d) {
  require_degree(d.size(), att.degree(), "local_vjp direction");
  if (const auto* sm = std::get_if<SparseMapSolution>(&sol.detail)) return jvp_sparsemap(*sm, d);

  const auto& cert = std::get<ClosedFormCertificate>(sol.detail);
  std::vector<double> g = vjp_closed_form(cert, d);
  if (att.kind != FactorKind::Pair) return {std::move(g), {}};

  std::vector<double> dm = {g[0], g[1]};
  if (att.additional_scores.size() == 1) return {std::move(dm), {g[2]}};
  const double d1 = cert.delta[0], d2 = cert.delta[1];
  std::vector<double> dn = {-d1 * g[0] - d2 * g[1] + g[2], d2 * g[1] - g[2],
                            d1 * g[0] - g[2], g[2]};
  return {std::move(dm), std::move(dn)};
}

}  // namespace structura
