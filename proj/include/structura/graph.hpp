#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace structura {

enum class FactorKind {
  Xor,
  Or,
  AtMostOne,
  Budget,
  Knapsack,
  OrOut,
  Pair,
  Negated,
  Sequence,
  Tree,
  Assignment,
  Dense,
};

std::string_view to_string(FactorKind kind);

// Kinds with an analytic forward/backward pass.
bool has_closed_form(FactorKind kind);

// Kinds allowed as the inner constraint of a Negated factor.
bool is_logic_constraint(FactorKind kind);

// One factor: the variables it covers (rows of its selector matrix, in
// order) plus kind-specific parameters. Unused parameters stay empty.
struct FactorAttachment {
  FactorKind kind = FactorKind::Xor;
  std::vector<std::size_t> variables;

  // Scores on the factor's additional statistics (eta_N), in the
  // declared layout of the kind:
  //   Pair:     {coupling} or the joint scores {FF, FT, TF, TT}
  //   Sequence: empty, one S x S transition grid shared across positions,
  //             or (L-1) grids, row-major (from-state, to-state)
  //   Dense:    one score per additional row
  std::vector<double> additional_scores;

  double budget = 1.0;                    // Budget, Knapsack
  std::vector<double> costs;              // Knapsack
  std::vector<bool> negation_mask;        // Negated
  std::shared_ptr<const FactorAttachment> inner;  // Negated: kind + params
  std::size_t num_states = 0;             // Sequence
  bool single_root = false;               // Tree
  std::vector<std::vector<double>> structures;   // Dense: m columns
  std::vector<std::vector<double>> additionals;  // Dense: n columns

  std::size_t degree() const { return variables.size(); }
};

FactorAttachment make_xor(std::vector<std::size_t> vars);
FactorAttachment make_or(std::vector<std::size_t> vars);
FactorAttachment make_at_most_one(std::vector<std::size_t> vars);
FactorAttachment make_budget(std::vector<std::size_t> vars, double budget);
FactorAttachment make_knapsack(std::vector<std::size_t> vars,
                               std::vector<double> costs, double budget);
// The last variable is the output: m_d = m_1 or ... or m_{d-1}.
FactorAttachment make_or_out(std::vector<std::size_t> vars);
FactorAttachment make_pair(std::size_t first, std::size_t second,
                           double coupling);
FactorAttachment make_pair_joint(std::size_t first, std::size_t second,
                                 std::vector<double> joint_scores);
FactorAttachment make_negated(std::vector<std::size_t> vars,
                              std::vector<bool> mask,
                              const FactorAttachment& inner);
// vars: L*S one-hot variables, position-major (var of position i, state s
// is vars[i * S + s]).
FactorAttachment make_sequence(std::vector<std::size_t> vars,
                               std::size_t num_states,
                               std::vector<double> transitions = {});
// vars: m*m arc variables in packed layout; entry (h, c) for h != c is the
// arc from word h to word c, the diagonal entry (c, c) is the root arc of c.
FactorAttachment make_tree(std::vector<std::size_t> vars,
                           bool single_root = false);
// vars: n*n variables, row-major; row i, column j means "i matched to j".
FactorAttachment make_assignment(std::vector<std::size_t> vars);
FactorAttachment make_dense(std::vector<std::size_t> vars,
                            std::vector<std::vector<double>> structures,
                            std::vector<std::vector<double>> additionals = {},
                            std::vector<double> additional_scores = {});

// Throws InvalidArgument when the kind parameters are inconsistent with
// the attachment's degree. Does not look at variable indices.
void validate_parameters(const FactorAttachment& att);

struct VariableRange {
  std::size_t first = 0;
  std::size_t count = 0;

  std::size_t operator[](std::size_t i) const { return first + i; }
  std::size_t size() const { return count; }
  std::vector<std::size_t> to_vector() const;
};

// Variables, factor attachments and the degree-scaled selector maps.
//
// The stacked selector C~ = D^{-1} C is never stored: slot k of factor f
// maps to variable j = factor(f).variables[k] with weight 1 / delta_j, and
// all local vectors live in one flat array ordered by factor, then slot.
class FactorGraph {
 public:
  VariableRange add_variables(std::size_t n);
  std::size_t attach_factor(FactorAttachment att);
  void finalize();

  bool finalized() const { return finalized_; }
  std::size_t num_variables() const { return num_variables_; }
  std::size_t num_factors() const { return factors_.size(); }
  const FactorAttachment& factor(std::size_t f) const { return factors_[f]; }
  std::span<const FactorAttachment> factors() const { return factors_; }

  std::span<const std::size_t> degrees() const { return degrees_; }
  std::span<const double> delta() const { return delta_; }

  // Total number of (factor, slot) pairs; the length of scatter output.
  std::size_t num_slots() const { return num_slots_; }
  std::size_t slot_offset(std::size_t f) const { return offsets_[f]; }
  // delta of the variable behind each slot.
  std::span<const double> slot_delta() const { return slot_delta_; }
  std::span<const double> slot_delta(std::size_t f) const;

  // (C~ mu): slot (f, k) receives mu_j / delta_j.
  std::vector<double> scatter(std::span<const double> mu) const;
  void scatter(std::span<const double> mu, std::span<double> out) const;
  // (C~^T v): entry j accumulates v_(f,k) / delta_j over its slots, in
  // factor order.
  std::vector<double> gather(std::span<const double> local) const;
  void gather(std::span<const double> local, std::span<double> out) const;

  template <class T>
  std::span<T> local(std::span<T> flat, std::size_t f) const {
    return flat.subspan(offsets_[f], factors_[f].degree());
  }

 private:
  void require_mutable() const;
  void require_finalized() const;

  std::size_t num_variables_ = 0;
  std::vector<FactorAttachment> factors_;
  std::vector<std::size_t> degrees_;
  std::vector<double> delta_;
  std::vector<std::size_t> offsets_;
  std::vector<double> slot_delta_;
  std::size_t num_slots_ = 0;
  bool finalized_ = false;
};

}  // namespace structura
