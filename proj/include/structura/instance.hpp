#pragma once

#include <span>
#include <string>
#include <vector>

#include "structura/admm.hpp"
#include "structura/graph.hpp"
#include "structura/loss.hpp"

namespace structura {

// A finalized graph with its scores, as described by an instance file.
struct Instance {
  FactorGraph graph;
  Scores scores;
};

Instance parse_instance(const std::string& json_text);
Instance load_instance(const std::string& path);

// Gold file: {"y": [...]} and/or {"factors": [{"m": [...], "n": [...]}, ...]}.
GoldAssignment parse_gold(const std::string& json_text, const FactorGraph& graph);
GoldAssignment load_gold(const std::string& path, const FactorGraph& graph);

// Shortest text that round-trips (17 significant digits).
std::string format_number(double x);
std::string format_array(std::span<const double> values);

// {"mu": [...], "status": ..., "iterations": k, "primal_residual": r, "dual_residual": r}
std::string format_solution(std::span<const double> mu, const std::string& status,
                            std::size_t iterations, double primal_residual,
                            double dual_residual);
std::string format_solution(const LpSparseMapSolution& sol);

// Re-emits a solution document produced by format_solution.
std::string reformat_solution(const std::string& json_text);

std::string read_file(const std::string& path);

}  // namespace structura
