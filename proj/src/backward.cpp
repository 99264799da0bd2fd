#include "structura/backward.hpp"

#include <cmath>
#include <string>

#include "structura/error.hpp"
#include "structura/factors.hpp"

namespace structura {

JvpResult jvp(const FactorGraph& graph, const LpSparseMapSolution& solution,
              std::span<const double> d, const BackwardConfig& cfg) {
  if (!graph.finalized()) throw ValidationError("jvp: graph is not finalized");
  if (d.size() != graph.num_variables()) {
    throw InvalidArgument("jvp: direction has " + std::to_string(d.size()) +
                          " entries, graph has " + std::to_string(graph.num_variables()) +
                          " variables");
  }
  if (solution.factors.size() != graph.num_factors()) {
    throw InvalidArgument("jvp: solution carries no backward state for this graph");
  }
  if (cfg.max_iterations < 1 || !(cfg.eps > 0.0)) {
    throw InvalidArgument("jvp: max_iterations >= 1 and eps > 0 required");
  }

  const std::size_t nslots = graph.num_slots();
  std::vector<double> current(d.begin(), d.end());
  std::vector<double> copies(nslots), local(nslots), next(graph.num_variables());
  JvpResult out;
  out.d_n.resize(graph.num_factors());

  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    graph.scatter(current, copies);
    for (std::size_t f = 0; f < graph.num_factors(); ++f) {
      const std::size_t off = graph.slot_offset(f);
      const std::size_t deg = graph.factor(f).degree();
      auto [dm, dn] = local_vjp(graph.factor(f), solution.factors[f],
                                std::span<const double>(copies).subspan(off, deg));
      std::copy(dm.begin(), dm.end(), local.begin() + static_cast<std::ptrdiff_t>(off));
      out.d_n[f] = std::move(dn);
    }
    graph.gather(local, next);
    double change = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j) {
      double r = next[j] - current[j];
      change += r * r;
    }
    out.iterations = t;
    current.swap(next);
    if (std::sqrt(change) <= cfg.eps) {
      out.converged = true;
      break;
    }
  }
  out.d_m = std::move(current);
  return out;
}

Eigen::MatrixXd materialize_jacobian(const FactorGraph& graph,
                                     const LpSparseMapSolution& solution,
                                     const BackwardConfig& cfg) {
  const std::size_t n = graph.num_variables();
  if (n > 64) throw InvalidArgument("materialize_jacobian: at most 64 variables supported");
  Eigen::MatrixXd jac(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = 1.0;
    JvpResult r = jvp(graph, solution, e, cfg);
    for (std::size_t j = 0; j < n; ++j) jac(i, j) = r.d_m[j];
    e[i] = 0.0;
  }
  return jac;
}

}  // namespace structura
