#include "structura/admm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "structura/error.hpp"

namespace structura {

namespace {

double norm_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double r = a[i] - b[i];
    s += r * r;
  }
  return std::sqrt(s);
}

std::size_t resolve_threads(std::size_t requested, std::size_t work) {
  std::size_t n = requested == 0 ? std::max(1U, std::thread::hardware_concurrency()) : requested;
  return std::max<std::size_t>(1, std::min(n, work));
}

// Runs body(f) for every factor; the first failure (lowest factor id) is
// rethrown after all workers finish.
template <class Body>
void for_each_factor(std::size_t count, std::size_t threads, const Body& body) {
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      try {
        body(f);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    run(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (std::size_t begin = 0; begin < count; begin += chunk) {
      pool.emplace_back(run, begin, std::min(count, begin + chunk));
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void validate(const FactorGraph& graph, const Scores& scores, const AdmmConfig& cfg) {
  if (!graph.finalized()) throw ValidationError("solve: graph is not finalized");
  if (scores.eta_m.size() != graph.num_variables()) {
    throw InvalidArgument("solve: eta has " + std::to_string(scores.eta_m.size()) +
                          " entries, graph has " + std::to_string(graph.num_variables()) +
                          " variables");
  }
  for (double x : scores.eta_m) {
    if (!std::isfinite(x)) throw InvalidArgument("solve: non-finite variable score");
  }
  if (scores.eta_n.size() != graph.num_factors()) {
    throw InvalidArgument("solve: expected additional scores for " +
                          std::to_string(graph.num_factors()) + " factors");
  }
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const std::size_t want = additional_arity(graph.factor(f));
    if (scores.eta_n[f].size() != want) {
      throw InvalidArgument("solve: factor " + std::to_string(f) + " expects " +
                            std::to_string(want) + " additional scores, got " +
                            std::to_string(scores.eta_n[f].size()));
    }
    for (double x : scores.eta_n[f]) {
      if (!std::isfinite(x)) {
        throw InvalidArgument("solve: non-finite additional score in factor " + std::to_string(f));
      }
    }
  }
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) {
    throw InvalidArgument("solve: gamma must be a finite non-negative number");
  }
  if (!(cfg.eps_primal > 0.0) || !(cfg.eps_dual > 0.0)) {
    throw InvalidArgument("solve: tolerances must be positive");
  }
  if (cfg.max_outer < 1) throw InvalidArgument("solve: max_outer must be at least 1");
}

}  // namespace

Scores make_scores(const FactorGraph& graph, std::vector<double> eta_m) {
  Scores s;
  s.eta_m = std::move(eta_m);
  s.eta_n.reserve(graph.num_factors());
  for (const auto& att : graph.factors()) s.eta_n.push_back(att.additional_scores);
  return s;
}

const char* to_string(SolveStatus s) {
  return s == SolveStatus::Converged ? "converged" : "max_iter";
}

std::pair<double, double> residuals(const FactorGraph& graph, std::span<const double> mu,
                                    std::span<const double> mu_prev,
                                    std::span<const double> local) {
  std::vector<double> copies = graph.scatter(mu);
  if (local.size() != copies.size() || mu_prev.size() != mu.size()) {
    throw InvalidArgument("residuals: shape mismatch");
  }
  return {norm_diff(copies, local), norm_diff(mu, mu_prev)};
}

LpSparseMapSolution solve(const FactorGraph& graph, const Scores& scores,
                          const AdmmConfig& cfg) {
  validate(graph, scores, cfg);
  const std::size_t nvars = graph.num_variables();
  const std::size_t nfactors = graph.num_factors();
  const std::size_t nslots = graph.num_slots();
  const double gamma = cfg.gamma;
  const double shrink = 1.0 / (1.0 + gamma);
  const std::size_t threads = resolve_threads(cfg.num_threads, nfactors);

  std::vector<double> mu(nvars);
  for (std::size_t j = 0; j < nvars; ++j) mu[j] = 1.0 / static_cast<double>(graph.degrees()[j]);
  std::vector<double> lambda(nslots, 0.0);
  const std::vector<double> eta_copies = graph.scatter(scores.eta_m);
  std::vector<double> copies = graph.scatter(mu);
  std::vector<double> local(nslots, 0.0);
  std::vector<double> mu_next(nvars);

  std::vector<std::vector<double>> eta_n_local(nfactors);
  for (std::size_t f = 0; f < nfactors; ++f) {
    eta_n_local[f] = scores.eta_n[f];
    for (double& x : eta_n_local[f]) x *= shrink;
  }

  LpSparseMapSolution out;
  out.factors.resize(nfactors);
  std::vector<bool> have_warm(nfactors, false);

  for (std::size_t t = 1; t <= cfg.max_outer; ++t) {
    for_each_factor(nfactors, threads, [&](std::size_t f) {
      const FactorAttachment& att = graph.factor(f);
      const std::size_t off = graph.slot_offset(f);
      const std::size_t d = att.degree();
      std::vector<double> eta_f(d);
      for (std::size_t k = 0; k < d; ++k) {
        eta_f[k] = shrink * (eta_copies[off + k] - lambda[off + k] + gamma * copies[off + k]);
      }
      try {
        LocalSolution sol = solve_local(att, eta_f, eta_n_local[f], graph.slot_delta(f),
                                        cfg.inner, cfg.force_generic,
                                        have_warm[f] ? &out.factors[f] : nullptr);
        std::copy(sol.mu.begin(), sol.mu.end(), local.begin() + static_cast<std::ptrdiff_t>(off));
        out.factors[f] = std::move(sol);
        have_warm[f] = true;
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("factor " + std::to_string(f) + " (" +
                              std::string(to_string(att.kind)) + "): " + e.what());
      } catch (const std::exception& e) {
        throw SolverError("factor " + std::to_string(f) + " (" +
                          std::string(to_string(att.kind)) + "): " + e.what());
      }
    });

    graph.gather(local, mu_next);
    for (std::size_t j = 0; j < nvars; ++j) {
      if (!std::isfinite(mu_next[j])) {
        throw SolverError("non-finite iterate at variable " + std::to_string(j) +
                          " in iteration " + std::to_string(t));
      }
    }
    graph.scatter(mu_next, copies);
    for (std::size_t s = 0; s < nslots; ++s) lambda[s] += gamma * (local[s] - copies[s]);

    out.primal_residual = norm_diff(copies, local);
    out.dual_residual = norm_diff(mu_next, mu);
    std::swap(mu, mu_next);
    out.iterations = t;

    if (cfg.trace) {
      AdmmTrace tr{t, mu, lambda, out.primal_residual, out.dual_residual};
      cfg.trace(tr);
    }
    // With gamma = 0 the subproblem scores do not depend on mu, so the
    // next iterate repeats this one and only the primal test matters.
    const bool dual_ok = out.dual_residual < cfg.eps_dual || gamma == 0.0;
    if (out.primal_residual < cfg.eps_primal && dual_ok) {
      out.status = SolveStatus::Converged;
      break;
    }
  }
  out.mu = std::move(mu);
  return out;
}

}  // namespace structura
