#include "structura/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "structura/error.hpp"

namespace structura {

namespace {

std::size_t exact_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : 0;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require(bool cond, FactorKind kind, const std::string& what) {
  if (!cond) {
    throw InvalidArgument(std::string(to_string(kind)) + " factor: " + what);
  }
}

}  // namespace

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::Xor: return "xor";
    case FactorKind::Or: return "or";
    case FactorKind::AtMostOne: return "atmostone";
    case FactorKind::Budget: return "budget";
    case FactorKind::Knapsack: return "knapsack";
    case FactorKind::OrOut: return "orout";
    case FactorKind::Pair: return "pair";
    case FactorKind::Negated: return "negated";
    case FactorKind::Sequence: return "sequence";
    case FactorKind::Tree: return "tree";
    case FactorKind::Assignment: return "assignment";
    case FactorKind::Dense: return "dense";
  }
  return "unknown";
}

bool has_closed_form(FactorKind kind) {
  switch (kind) {
    case FactorKind::Xor:
    case FactorKind::Or:
    case FactorKind::AtMostOne:
    case FactorKind::Budget:
    case FactorKind::Knapsack:
    case FactorKind::OrOut:
    case FactorKind::Pair:
    case FactorKind::Negated:
      return true;
    default:
      return false;
  }
}

bool is_logic_constraint(FactorKind kind) {
  switch (kind) {
    case FactorKind::Xor:
    case FactorKind::Or:
    case FactorKind::AtMostOne:
    case FactorKind::Budget:
    case FactorKind::Knapsack:
    case FactorKind::OrOut:
      return true;
    default:
      return false;
  }
}

FactorAttachment make_xor(std::vector<std::size_t> vars) {
  FactorAttachment att;
  att.kind = FactorKind::Xor;
  att.variables = std::move(vars);
  return att;
}

FactorAttachment make_or(std::vector<std::size_t> vars) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Or;
  return att;
}

FactorAttachment make_at_most_one(std::vector<std::size_t> vars) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::AtMostOne;
  return att;
}

FactorAttachment make_budget(std::vector<std::size_t> vars, double budget) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Budget;
  att.budget = budget;
  return att;
}

FactorAttachment make_knapsack(std::vector<std::size_t> vars,
                               std::vector<double> costs, double budget) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Knapsack;
  att.costs = std::move(costs);
  att.budget = budget;
  return att;
}

FactorAttachment make_or_out(std::vector<std::size_t> vars) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::OrOut;
  return att;
}

FactorAttachment make_pair(std::size_t first, std::size_t second,
                           double coupling) {
  FactorAttachment att = make_xor({first, second});
  att.kind = FactorKind::Pair;
  att.additional_scores = {coupling};
  return att;
}

FactorAttachment make_pair_joint(std::size_t first, std::size_t second,
                                 std::vector<double> joint_scores) {
  FactorAttachment att = make_xor({first, second});
  att.kind = FactorKind::Pair;
  att.additional_scores = std::move(joint_scores);
  return att;
}

FactorAttachment make_negated(std::vector<std::size_t> vars,
                              std::vector<bool> mask,
                              const FactorAttachment& inner) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Negated;
  att.negation_mask = std::move(mask);
  FactorAttachment in = inner;
  in.variables.clear();
  att.inner = std::make_shared<const FactorAttachment>(std::move(in));
  return att;
}

FactorAttachment make_sequence(std::vector<std::size_t> vars,
                               std::size_t num_states,
                               std::vector<double> transitions) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Sequence;
  att.num_states = num_states;
  att.additional_scores = std::move(transitions);
  return att;
}

FactorAttachment make_tree(std::vector<std::size_t> vars, bool single_root) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Tree;
  att.single_root = single_root;
  return att;
}

FactorAttachment make_assignment(std::vector<std::size_t> vars) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Assignment;
  return att;
}

FactorAttachment make_dense(std::vector<std::size_t> vars,
                            std::vector<std::vector<double>> structures,
                            std::vector<std::vector<double>> additionals,
                            std::vector<double> additional_scores) {
  FactorAttachment att = make_xor(std::move(vars));
  att.kind = FactorKind::Dense;
  att.structures = std::move(structures);
  att.additionals = std::move(additionals);
  att.additional_scores = std::move(additional_scores);
  return att;
}

namespace {

void validate_with_degree(const FactorAttachment& att, std::size_t d) {
  const FactorKind kind = att.kind;
  require(d >= 1, kind, "needs at least one variable");
  require(all_finite(att.additional_scores), kind, "non-finite additional score");

  const bool logic = is_logic_constraint(kind);
  if (logic) {
    require(att.additional_scores.empty(), kind, "takes no additional scores");
  }

  switch (kind) {
    case FactorKind::Xor:
    case FactorKind::Or:
    case FactorKind::AtMostOne:
      break;
    case FactorKind::Budget:
      require(std::isfinite(att.budget) && att.budget >= 0.0, kind,
              "budget must be a finite non-negative number");
      break;
    case FactorKind::Knapsack:
      require(att.costs.size() == d, kind,
              "expected " + std::to_string(d) + " costs, got " +
                  std::to_string(att.costs.size()));
      require(all_finite(att.costs), kind, "non-finite cost");
      require(std::all_of(att.costs.begin(), att.costs.end(),
                          [](double c) { return c >= 0.0; }),
              kind, "costs must be non-negative");
      require(std::isfinite(att.budget) && att.budget >= 0.0, kind,
              "budget must be a finite non-negative number");
      break;
    case FactorKind::OrOut:
      require(d >= 2, kind, "needs at least one input and the output");
      break;
    case FactorKind::Pair:
      require(d == 2, kind, "covers exactly two variables");
      require(att.additional_scores.size() == 1 ||
                  att.additional_scores.size() == 4,
              kind, "expects one coupling score or four joint scores");
      break;
    case FactorKind::Negated:
      require(att.inner != nullptr, kind, "missing inner factor");
      require(is_logic_constraint(att.inner->kind), kind,
              "inner factor must be a logic constraint");
      require(att.negation_mask.size() == d, kind,
              "mask length must equal the number of variables");
      validate_with_degree(*att.inner, d);
      break;
    case FactorKind::Sequence: {
      const std::size_t s = att.num_states;
      require(s >= 1, kind, "needs at least one state");
      require(d % s == 0, kind, "variable count must be a multiple of the state count");
      const std::size_t len = d / s;
      const std::size_t k = att.additional_scores.size();
      require(k == 0 || k == s * s || k == (len - 1) * s * s, kind,
              "transition scores must be empty, S*S or (L-1)*S*S");
      break;
    }
    case FactorKind::Tree:
      require(exact_sqrt(d) >= 1, kind, "packed layout needs m*m variables");
      break;
    case FactorKind::Assignment:
      require(exact_sqrt(d) >= 1, kind, "needs n*n variables");
      break;
    case FactorKind::Dense: {
      require(!att.structures.empty(), kind, "needs at least one structure");
      for (const auto& m : att.structures) {
        require(m.size() == d, kind, "structure length must equal the variable count");
        require(all_finite(m), kind, "non-finite structure entry");
      }
      const std::size_t dn = att.additional_scores.size();
      if (dn > 0 || !att.additionals.empty()) {
        require(att.additionals.size() == att.structures.size(), kind,
                "one additional column per structure");
        for (const auto& n : att.additionals) {
          require(n.size() == dn, kind,
                  "additional column length must equal the additional score count");
          require(all_finite(n), kind, "non-finite additional entry");
        }
      }
      break;
    }
  }
}

}  // namespace

void validate_parameters(const FactorAttachment& att) {
  validate_with_degree(att, att.degree());
}

std::vector<std::size_t> VariableRange::to_vector() const {
  std::vector<std::size_t> out(count);
  std::iota(out.begin(), out.end(), first);
  return out;
}

void FactorGraph::require_mutable() const {
  if (finalized_) throw ValidationError("factor graph is finalized and cannot be modified");
}

void FactorGraph::require_finalized() const {
  if (!finalized_) throw ValidationError("factor graph is not finalized");
}

VariableRange FactorGraph::add_variables(std::size_t n) {
  require_mutable();
  if (n == 0) throw InvalidArgument("add_variables: count must be positive");
  VariableRange range{num_variables_, n};
  num_variables_ += n;
  return range;
}

std::size_t FactorGraph::attach_factor(FactorAttachment att) {
  require_mutable();
  std::unordered_set<std::size_t> seen;
  for (std::size_t j : att.variables) {
    if (j >= num_variables_) {
      throw InvalidArgument("variable index " + std::to_string(j) +
                            " out of range (graph has " +
                            std::to_string(num_variables_) + " variables)");
    }
    if (!seen.insert(j).second) {
      throw InvalidArgument("variable " + std::to_string(j) +
                            " appears twice in one factor");
    }
  }
  validate_parameters(att);
  factors_.push_back(std::move(att));
  return factors_.size() - 1;
}

void FactorGraph::finalize() {
  if (finalized_) return;
  if (factors_.empty()) throw ValidationError("factor graph has no factors");

  std::vector<std::size_t> degrees(num_variables_, 0);
  for (const auto& att : factors_) {
    for (std::size_t j : att.variables) ++degrees[j];
  }
  for (std::size_t j = 0; j < num_variables_; ++j) {
    if (degrees[j] == 0) {
      throw ValidationError("variable " + std::to_string(j) +
                            " is not attached to any factor");
    }
  }

  degrees_ = std::move(degrees);
  delta_.resize(num_variables_);
  for (std::size_t j = 0; j < num_variables_; ++j) {
    delta_[j] = std::sqrt(static_cast<double>(degrees_[j]));
  }

  offsets_.resize(factors_.size());
  num_slots_ = 0;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    offsets_[f] = num_slots_;
    num_slots_ += factors_[f].degree();
  }
  slot_delta_.resize(num_slots_);
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const auto& vars = factors_[f].variables;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      slot_delta_[offsets_[f] + k] = delta_[vars[k]];
    }
  }
  finalized_ = true;
}

std::span<const double> FactorGraph::slot_delta(std::size_t f) const {
  return std::span<const double>(slot_delta_).subspan(offsets_[f], factors_[f].degree());
}

std::vector<double> FactorGraph::scatter(std::span<const double> mu) const {
  std::vector<double> out(num_slots_);
  scatter(mu, out);
  return out;
}

void FactorGraph::scatter(std::span<const double> mu, std::span<double> out) const {
  require_finalized();
  if (mu.size() != num_variables_ || out.size() != num_slots_) {
    throw InvalidArgument("scatter: expected " + std::to_string(num_variables_) +
                          " entries, got " + std::to_string(mu.size()));
  }
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const auto& vars = factors_[f].variables;
    double* dst = out.data() + offsets_[f];
    for (std::size_t k = 0; k < vars.size(); ++k) {
      dst[k] = mu[vars[k]] / delta_[vars[k]];
    }
  }
}

std::vector<double> FactorGraph::gather(std::span<const double> local) const {
  std::vector<double> out(num_variables_);
  gather(local, out);
  return out;
}

void FactorGraph::gather(std::span<const double> local, std::span<double> out) const {
  require_finalized();
  if (local.size() != num_slots_ || out.size() != num_variables_) {
    throw InvalidArgument("gather: expected " + std::to_string(num_slots_) +
                          " slot values, got " + std::to_string(local.size()));
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const auto& vars = factors_[f].variables;
    const double* src = local.data() + offsets_[f];
    for (std::size_t k = 0; k < vars.size(); ++k) out[vars[k]] += src[k];
  }
  for (std::size_t j = 0; j < num_variables_; ++j) out[j] /= delta_[j];
}

}  // namespace structura
