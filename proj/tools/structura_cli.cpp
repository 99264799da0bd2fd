#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "structura/admm.hpp"
#include "structura/backward.hpp"
#include "structura/error.hpp"
#include "structura/instance.hpp"
#include "structura/loss.hpp"
#ifdef STRUCTURA_HAS_REFERENCE
#include "structura/reference.hpp"
#endif

using namespace structura;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitMaxIter = 2;

struct SolverFlags {
  double gamma = 0.1;
  std::size_t max_iter = 1000;
  std::size_t max_inner_iter = 10;
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  std::size_t backward_iter = 100;
  bool force_generic = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "ADMM step size")->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "maximum outer ADMM iterations")->capture_default_str();
    cmd->add_option("--max-inner-iter", max_inner_iter, "maximum active-set iterations per factor")
        ->capture_default_str();
    cmd->add_option("--eps-primal", eps_primal, "primal residual tolerance")->capture_default_str();
    cmd->add_option("--eps-dual", eps_dual, "dual residual tolerance")->capture_default_str();
    cmd->add_option("--backward-iter", backward_iter, "maximum backward iterations")
        ->capture_default_str();
    cmd->add_flag("--force-generic", force_generic, "solve every factor with the active set");
  }

  AdmmConfig admm() const {
    AdmmConfig cfg;
    cfg.gamma = gamma;
    cfg.max_outer = max_iter;
    cfg.inner.max_iterations = max_inner_iter;
    cfg.eps_primal = eps_primal;
    cfg.eps_dual = eps_dual;
    cfg.backward_power_iterations = backward_iter;
    cfg.force_generic = force_generic;
    cfg.num_threads = threads_from_env();
    return cfg;
  }

  static std::size_t threads_from_env() {
    const char* env = std::getenv("STRUCTURA_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw InvalidArgument("STRUCTURA_THREADS must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

int cmd_solve(const std::string& input, const std::string& output, const SolverFlags& flags) {
  Instance inst = load_instance(input);
  LpSparseMapSolution sol = solve(inst.graph, inst.scores, flags.admm());
  write_output(output, format_solution(sol));
  if (!sol.converged()) {
    std::cerr << "structura: reached " << sol.iterations
              << " iterations without meeting the tolerances\n";
    return kExitMaxIter;
  }
  return kExitOk;
}

int cmd_loss(const std::string& input, const std::string& gold_path, const std::string& output,
             const SolverFlags& flags) {
  Instance inst = load_instance(input);
  GoldAssignment gold = load_gold(gold_path, inst.graph);
  validate_gold(inst.graph, gold);
  LossResult r = evaluate_loss(inst.graph, inst.scores, gold, flags.admm());

  std::string text = "{\"loss\": " + format_number(r.value);
  text += ", \"status\": \"" + std::string(to_string(r.solution.status)) + "\"";
  text += ", \"grad_eta_m\": " + format_array(r.grad.eta_m);
  text += ", \"grad_eta_n\": [";
  for (std::size_t f = 0; f < r.grad.eta_n.size(); ++f) {
    if (f > 0) text += ", ";
    text += format_array(r.grad.eta_n[f]);
  }
  text += "]}\n";
  if (output.empty()) {
    std::cout << text;
  } else {
    std::cout << "loss " << format_number(r.value) << "\n";
    write_output(output, text);
  }
  if (!r.exact) {
    std::cerr << "structura: forward solve hit the iteration cap; the loss is a lower bound\n";
    return kExitMaxIter;
  }
  return kExitOk;
}

#ifdef STRUCTURA_HAS_REFERENCE
int cmd_gradcheck(const std::string& input, double h, unsigned long long seed,
                  std::size_t trials, const SolverFlags& flags) {
  Instance inst = load_instance(input);
  AdmmConfig cfg = flags.admm();
  BackwardConfig bcfg;
  bcfg.max_iterations = flags.backward_iter;

  LpSparseMapSolution base = solve(inst.graph, inst.scores, cfg);
  if (!base.converged()) {
    std::cerr << "structura: forward solve did not converge; gradients are undefined\n";
    return kExitMaxIter;
  }

  std::mt19937_64 rng(seed);
  constexpr double threshold = 1e-3;
  double worst = 0.0;
  std::size_t failures = 0, unstable = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    reference::GradientProbe probe = reference::random_probe(inst.graph, rng);
    reference::GradientCheck c =
        reference::check_gradient(inst.graph, inst.scores, cfg, bcfg, probe, h);
    const bool ok = c.relative_error <= threshold;
    if (!c.support_stable) ++unstable;
    if (c.support_stable && !ok) ++failures;
    if (c.support_stable) worst = std::max(worst, c.relative_error);
    std::printf("trial %zu analytic %.12g numeric %.12g rel_error %.3e%s\n", t, c.analytic,
                c.numeric, c.relative_error,
                c.support_stable ? (ok ? "" : " FAIL") : " (support change, skipped)");
  }
  if (trials > 0) {
    std::printf("%s: %zu trials, %zu skipped, max rel_error %.3e (threshold %.0e)\n",
                failures == 0 ? "PASS" : "FAIL", trials, unstable, worst, threshold);
  }
  return failures == 0 ? kExitOk : kExitInput;
}
#endif

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structura: LP-SparseMAP inference over factor graphs"};
  app.require_subcommand(1);

  std::string input, output, gold;
  SolverFlags solve_flags, loss_flags, check_flags;
  check_flags.eps_primal = 1e-10;
  check_flags.eps_dual = 1e-10;
  check_flags.max_iter = 100000;

  auto* solve_cmd = app.add_subcommand("solve", "solve an instance and write mu as JSON");
  solve_cmd->add_option("input", input, "instance file")->required();
  solve_cmd->add_option("-o,--output", output, "output file (default: stdout)");
  solve_flags.add_to(solve_cmd);

  auto* loss_cmd = app.add_subcommand("loss", "evaluate the loss and its gradients");
  loss_cmd->add_option("input", input, "instance file")->required();
  loss_cmd->add_option("gold", gold, "gold file")->required();
  loss_cmd->add_option("-o,--output", output, "gradient output file (default: stdout)");
  loss_flags.add_to(loss_cmd);

  double h = 1e-4;
  unsigned long long seed = 0;
  std::size_t trials = 10;
  auto* check_cmd = app.add_subcommand("gradcheck", "compare backward products with finite differences");
  check_cmd->set_help_flag("--help", "print this help message and exit");
  check_cmd->add_option("input", input, "instance file")->required();
  check_cmd->add_option("--h", h, "finite-difference step")->capture_default_str();
  check_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
  check_cmd->add_option("--trials", trials, "number of random directions")->capture_default_str();
  check_flags.add_to(check_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*solve_cmd) return cmd_solve(input, output, solve_flags);
    if (*loss_cmd) return cmd_loss(input, gold, output, loss_flags);
    if (*check_cmd) {
#ifdef STRUCTURA_HAS_REFERENCE
      return cmd_gradcheck(input, h, seed, trials, check_flags);
#else
      std::cerr << "structura: gradcheck needs a build with STRUCTURA_WITH_REFERENCE=ON\n";
      return kExitInput;
#endif
    }
  } catch (const std::exception& e) {
    std::cerr << "structura: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
