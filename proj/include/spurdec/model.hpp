#pragma once

// Discrete structural causal models: finite categorical variables, tabular
// (or expression-compiled) mechanisms, mutually independent exogenous
// distributions, and exact enumeration of observational and interventional
// distributions over the endogenous variables.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace spurdec {

// Partial or total assignment of domain value labels to variable names.
using Assignment = std::map<std::string, std::string>;

// Unordered collection of variable names (set semantics everywhere).
using NameSet = std::set<std::string>;

struct Variable {
    std::string name;
    std::vector<std::string> domain;  // ordered, distinct value labels
    std::vector<double> numeric;      // numeric encoding per value (NaN if none)
    bool has_numeric = false;

    int index_of(const std::string& value) const;  // -1 if absent
};

struct Mechanism {
    std::string target;
    std::vector<std::string> parents;      // endogenous parents, ordered
    std::vector<std::string> exo_parents;  // exogenous parents, ordered
    // Flattened lookup table over the joint parent domain. Parent slots are
    // ordered (parents..., exo_parents...) with the first slot varying slowest.
    std::vector<int> table;
};

struct ExogenousDistribution {
    std::string variable;
    std::vector<double> probabilities;  // aligned with the variable's domain
};

// Exact distribution over the endogenous variables (model declaration order,
// first variable slowest in the flattened index).
struct Distribution {
    std::vector<Variable> variables;
    std::vector<double> probs;

    double prob(const Assignment& event) const;
    double conditional_prob(const Assignment& event, const Assignment& given) const;
    double expectation(const std::string& var) const;
    double conditional_expectation(const std::string& var, const Assignment& given) const;
    double total() const;
};

class Scm {
  public:
    Scm(std::vector<Variable> endogenous, std::vector<Variable> exogenous,
        std::vector<Mechanism> mechanisms, std::vector<ExogenousDistribution> dists);

    const std::vector<Variable>& endogenous() const { return endo_; }
    const std::vector<Variable>& exogenous() const { return exo_; }
    const std::vector<Mechanism>& mechanisms() const { return mechs_; }
    const std::vector<ExogenousDistribution>& exogenous_dists() const { return dists_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    int endo_index(const std::string& name) const;  // -1 if absent
    int exo_index(const std::string& name) const;
    const Variable& endo_var(int i) const { return endo_[i]; }
    const Variable& exo_var(int i) const { return exo_[i]; }

    // Number of joint exogenous configurations (capped at construction).
    std::uint64_t unit_count() const { return unit_count_; }
    static constexpr std::uint64_t kEnumerationCap = std::uint64_t{1} << 24;

    // --- unit-level semantics -------------------------------------------------

    // Evaluate all mechanisms in topological order for a total exogenous
    // assignment; returns the unique endogenous solution.
    Assignment evaluate_unit(const Assignment& u) const;

    // Replace mechanisms of intervened variables with constants.
    Scm submodel(const Assignment& intervention) const;

    // evaluate_unit(submodel(intervention), u)[target]
    std::string potential_response(const Assignment& u, const Assignment& intervention,
                                   const std::string& target) const;

    // --- exact distributions --------------------------------------------------

    Distribution joint_observational() const;
    Distribution interventional(const Assignment& intervention) const;

    // --- indexed fast paths (used by the inference layer) ----------------------

    // Decode a flat unit index into per-exogenous value indices.
    void decode_unit(std::uint64_t flat, std::vector<int>& u) const;
    double unit_weight(const std::vector<int>& u) const;
    // Evaluate into value indices; do_values[i] >= 0 forces endogenous i.
    void evaluate_indexed(const std::vector<int>& u, const std::vector<int>& do_values,
                          std::vector<int>& v) const;
    // Resolve a label assignment over endogenous variables into (index, value) pairs.
    std::vector<std::pair<int, int>> resolve_endo(const Assignment& a) const;
    std::vector<std::pair<int, int>> resolve_exo(const Assignment& a) const;
    // Numeric value of endogenous variable i at value index v (throws if the
    // variable has no numeric encoding).
    double numeric_value(int endo_idx, int value_idx) const;

    const std::vector<int>& topo_order() const { return topo_; }
    // Mechanism parent slots resolved to indices (endogenous >= 0, exogenous
    // encoded as -(idx+1)), aligned with mechanisms().
    const std::vector<std::vector<int>>& parent_slots() const { return slots_; }

  private:
    std::vector<Variable> endo_;
    std::vector<Variable> exo_;
    std::vector<Mechanism> mechs_;  // aligned with endo_
    std::vector<ExogenousDistribution> dists_;  // aligned with exo_
    std::map<std::string, int> endo_idx_;
    std::map<std::string, int> exo_idx_;
    std::vector<int> topo_;                  // endogenous evaluation order
    std::vector<std::vector<int>> slots_;    // resolved parent indices per mechanism
    std::vector<std::vector<int>> strides_;  // per-mechanism radix strides
    std::uint64_t unit_count_ = 1;
    std::vector<std::string> warnings_;

    void validate();
};

// Load a model from its JSON file format (see README: endogenous domains,
// exogenous distributions with bernoulli/multinomial/table shorthands, and
// tabular or expression mechanisms).
Scm load_model(const std::string& path);
Scm parse_model(const std::string& json_text);

}  // namespace spurdec
