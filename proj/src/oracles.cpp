#include "structura/oracles.hpp"

#include <cmath>
#include <string>

#include "structura/error.hpp"

namespace structura {

namespace {

bool near_or_above(double value, double best) {
  return value >= best - 1e-12 * (1.0 + std::abs(best));
}

}  // namespace

double structure_score(const Structure& s, std::span<const double> eta_m,
                       std::span<const double> eta_n) {
  if (s.m.size() != eta_m.size() || s.n.size() != eta_n.size()) {
    throw InvalidArgument("structure/score length mismatch: m " +
                          std::to_string(s.m.size()) + " vs " +
                          std::to_string(eta_m.size()) + ", n " +
                          std::to_string(s.n.size()) + " vs " +
                          std::to_string(eta_n.size()));
  }
  double score = 0.0;
  for (std::size_t i = 0; i < s.m.size(); ++i) score += s.m[i] * eta_m[i];
  for (std::size_t i = 0; i < s.n.size(); ++i) score += s.n[i] * eta_n[i];
  return score;
}

Structure map_enumerate(std::span<const Structure> structures,
                        std::span<const double> eta_m,
                        std::span<const double> eta_n) {
  if (structures.empty()) throw InvalidArgument("map_enumerate: empty structure list");
  std::size_t best = 0;
  double best_score = structure_score(structures[0], eta_m, eta_n);
  for (std::size_t k = 1; k < structures.size(); ++k) {
    double s = structure_score(structures[k], eta_m, eta_n);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  Structure out = structures[best];
  out.score = best_score;
  return out;
}

Structure map_viterbi(const Eigen::MatrixXd& unary,
                      const Eigen::MatrixXd& transition) {
  const Eigen::Index len = unary.rows();
  std::vector<Eigen::MatrixXd> grids(len > 1 ? len - 1 : 0, transition);
  return map_viterbi(unary, grids);
}

Structure map_viterbi(const Eigen::MatrixXd& unary,
                      std::span<const Eigen::MatrixXd> transitions) {
  const Eigen::Index len = unary.rows();
  const Eigen::Index ns = unary.cols();
  if (len < 1 || ns < 1) throw InvalidArgument("map_viterbi: empty unary grid");
  if (static_cast<Eigen::Index>(transitions.size()) != len - 1) {
    throw InvalidArgument("map_viterbi: expected " + std::to_string(len - 1) +
                          " transition grids");
  }
  for (const auto& t : transitions) {
    if (t.rows() != ns || t.cols() != ns) {
      throw InvalidArgument("map_viterbi: transition grid must be S x S");
    }
  }

  // value(i, s): best score of positions i..L-1 given state s at i.
  Eigen::MatrixXd value(len, ns);
  value.row(len - 1) = unary.row(len - 1);
  for (Eigen::Index i = len - 2; i >= 0; --i) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      double best = transitions[i](s, 0) + value(i + 1, 0);
      for (Eigen::Index t = 1; t < ns; ++t) {
        best = std::max(best, transitions[i](s, t) + value(i + 1, t));
      }
      value(i, s) = unary(i, s) + best;
    }
  }

  std::vector<Eigen::Index> path(len);
  {
    double best = value.row(0).maxCoeff();
    Eigen::Index s = 0;
    while (!near_or_above(value(0, s), best)) ++s;
    path[0] = s;
  }
  for (Eigen::Index i = 0; i + 1 < len; ++i) {
    const Eigen::Index from = path[i];
    double best = transitions[i](from, 0) + value(i + 1, 0);
    for (Eigen::Index t = 1; t < ns; ++t) {
      best = std::max(best, transitions[i](from, t) + value(i + 1, t));
    }
    Eigen::Index t = 0;
    while (!near_or_above(transitions[i](from, t) + value(i + 1, t), best)) ++t;
    path[i + 1] = t;
  }

  Structure out;
  out.m.assign(static_cast<std::size_t>(len * ns), 0.0);
  out.n.assign(static_cast<std::size_t>((len - 1) * ns * ns), 0.0);
  double score = 0.0;
  for (Eigen::Index i = 0; i < len; ++i) {
    out.m[static_cast<std::size_t>(i * ns + path[i])] = 1.0;
    score += unary(i, path[i]);
    if (i + 1 < len) {
      out.n[static_cast<std::size_t>(i * ns * ns + path[i] * ns + path[i + 1])] = 1.0;
      score += transitions[i](path[i], path[i + 1]);
    }
  }
  out.score = score;
  return out;
}

}  // namespace structura
