#include "structura/instance.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "structura/error.hpp"
#include "structura/factors.hpp"

namespace structura {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidArgument(where + ": " + what);
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(what + ": malformed JSON: " + e.what());
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  double x = j.get<double>();
  if (!std::isfinite(x)) fail(where, "expected a finite number");
  return x;
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    fail(where, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<std::size_t> indices(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of variable indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(count(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<std::vector<double>> matrix(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(numbers(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

const json& field(const json& rec, const char* key, const std::string& where) {
  if (!rec.contains(key)) fail(where, std::string("missing field \"") + key + "\"");
  return rec.at(key);
}

FactorAttachment parse_factor(const json& rec, const std::string& where, bool with_vars) {
  if (!rec.is_object()) fail(where, "expected an object");
  const json& type_j = field(rec, "type", where);
  if (!type_j.is_string()) fail(where + ".type", "expected a string");
  const std::string type = type_j.get<std::string>();

  std::vector<std::size_t> vars;
  if (with_vars) vars = indices(field(rec, "vars", where), where + ".vars");

  if (type == "xor") return make_xor(std::move(vars));
  if (type == "or") return make_or(std::move(vars));
  if (type == "atmostone") return make_at_most_one(std::move(vars));
  if (type == "orout") return make_or_out(std::move(vars));
  if (type == "assignment") return make_assignment(std::move(vars));
  if (type == "budget") {
    return make_budget(std::move(vars), number(field(rec, "budget", where), where + ".budget"));
  }
  if (type == "knapsack") {
    return make_knapsack(std::move(vars), numbers(field(rec, "costs", where), where + ".costs"),
                         number(field(rec, "budget", where), where + ".budget"));
  }
  if (type == "pair") {
    if (vars.size() != 2) fail(where + ".vars", "pair factors cover exactly two variables");
    if (rec.contains("joint")) {
      return make_pair_joint(vars[0], vars[1], numbers(rec.at("joint"), where + ".joint"));
    }
    const json& c = field(rec, "coupling", where);
    if (c.is_array()) return make_pair_joint(vars[0], vars[1], numbers(c, where + ".coupling"));
    return make_pair(vars[0], vars[1], number(c, where + ".coupling"));
  }
  if (type == "negated") {
    const json& mask_j = field(rec, "mask", where);
    if (!mask_j.is_array()) fail(where + ".mask", "expected an array of booleans");
    std::vector<bool> mask;
    for (std::size_t i = 0; i < mask_j.size(); ++i) {
      if (!mask_j[i].is_boolean()) {
        fail(where + ".mask[" + std::to_string(i) + "]", "expected a boolean");
      }
      mask.push_back(mask_j[i].get<bool>());
    }
    FactorAttachment inner = parse_factor(field(rec, "inner", where), where + ".inner", false);
    return make_negated(std::move(vars), std::move(mask), inner);
  }
  if (type == "sequence") {
    std::size_t states = count(field(rec, "states", where), where + ".states");
    std::vector<double> transition;
    if (rec.contains("transition")) transition = numbers(rec.at("transition"), where + ".transition");
    return make_sequence(std::move(vars), states, std::move(transition));
  }
  if (type == "tree") {
    bool single = false;
    if (rec.contains("single_root")) {
      if (!rec.at("single_root").is_boolean()) fail(where + ".single_root", "expected a boolean");
      single = rec.at("single_root").get<bool>();
    }
    return make_tree(std::move(vars), single);
  }
  if (type == "dense") {
    auto structures = matrix(field(rec, "structures", where), where + ".structures");
    std::vector<std::vector<double>> additionals;
    std::vector<double> eta_add;
    if (rec.contains("additionals")) additionals = matrix(rec.at("additionals"), where + ".additionals");
    if (rec.contains("eta_add")) eta_add = numbers(rec.at("eta_add"), where + ".eta_add");
    return make_dense(std::move(vars), std::move(structures), std::move(additionals),
                      std::move(eta_add));
  }
  fail(where + ".type", "unknown factor type \"" + type + "\"");
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Instance parse_instance(const std::string& json_text) {
  json doc = parse_text(json_text, "instance");
  if (!doc.is_object()) fail("instance", "expected a JSON object");
  const std::size_t n = count(field(doc, "num_variables", "instance"), "num_variables");
  std::vector<double> eta = numbers(field(doc, "eta", "instance"), "eta");
  if (eta.size() != n) {
    fail("eta", "expected " + std::to_string(n) + " scores, got " + std::to_string(eta.size()));
  }
  const json& factors = field(doc, "factors", "instance");
  if (!factors.is_array()) fail("factors", "expected an array");

  Instance inst;
  if (n > 0) inst.graph.add_variables(n);
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const std::string where = "factors[" + std::to_string(f) + "]";
    try {
      inst.graph.attach_factor(parse_factor(factors[f], where, true));
    } catch (const InvalidArgument& e) {
      std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      fail(where, msg);
    }
  }
  try {
    inst.graph.finalize();
  } catch (const ValidationError& e) {
    fail("instance", e.what());
  }
  inst.scores = make_scores(inst.graph, std::move(eta));
  return inst;
}

Instance load_instance(const std::string& path) { return parse_instance(read_file(path)); }

GoldAssignment parse_gold(const std::string& json_text, const FactorGraph& graph) {
  json doc = parse_text(json_text, "gold");
  if (!doc.is_object()) fail("gold", "expected a JSON object");
  if (doc.contains("factors")) {
    const json& fs = doc.at("factors");
    if (!fs.is_array()) fail("gold.factors", "expected an array");
    std::vector<std::vector<double>> m, n;
    for (std::size_t f = 0; f < fs.size(); ++f) {
      const std::string where = "gold.factors[" + std::to_string(f) + "]";
      m.push_back(numbers(field(fs[f], "m", where), where + ".m"));
      if (fs[f].contains("n")) {
        n.push_back(numbers(fs[f].at("n"), where + ".n"));
      } else if (f < graph.num_factors() && m.back().size() == graph.factor(f).degree()) {
        n.push_back(implied_additionals(graph.factor(f), m.back()));
      } else {
        n.emplace_back();
      }
    }
    GoldAssignment g = GoldAssignment::from_factors(graph, std::move(m), std::move(n));
    if (doc.contains("y")) {
      std::vector<double> y = numbers(doc.at("y"), "gold.y");
      if (y != g.global) throw ValidationError("gold: \"y\" disagrees with the factor structures");
    }
    return g;
  }
  return GoldAssignment::from_global(graph, numbers(field(doc, "y", "gold"), "gold.y"));
}

GoldAssignment load_gold(const std::string& path, const FactorGraph& graph) {
  return parse_gold(read_file(path), graph);
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_array(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_number(values[i]);
  }
  return out + "]";
}

std::string format_solution(std::span<const double> mu, const std::string& status,
                            std::size_t iterations, double primal_residual,
                            double dual_residual) {
  std::string out = "{\"mu\": " + format_array(mu);
  out += ", \"status\": \"" + status + "\"";
  out += ", \"iterations\": " + std::to_string(iterations);
  out += ", \"primal_residual\": " + format_number(primal_residual);
  out += ", \"dual_residual\": " + format_number(dual_residual);
  return out + "}\n";
}

std::string format_solution(const LpSparseMapSolution& sol) {
  return format_solution(sol.mu, to_string(sol.status), sol.iterations, sol.primal_residual,
                         sol.dual_residual);
}

std::string reformat_solution(const std::string& json_text) {
  json doc = parse_text(json_text, "solution");
  return format_solution(doc.at("mu").get<std::vector<double>>(),
                         doc.at("status").get<std::string>(),
                         doc.at("iterations").get<std::size_t>(),
                         doc.at("primal_residual").get<double>(),
                         doc.at("dual_residual").get<double>());
}

}  // namespace structura
