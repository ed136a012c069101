#pragma once

// Estimation from tabular data: datasets with declared finite domains,
// conditional probability tables, plug-in evaluation of the identified
// adjustment formulas, decomposition estimates, and percentile-bootstrap
// confidence intervals with deterministic per-replicate streams.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spurdec/decompose.hpp"
#include "spurdec/diagram.hpp"
#include "spurdec/model.hpp"

namespace spurdec {

struct Dataset {
    std::vector<Variable> columns;  // ordered, with declared domains
    std::vector<int> cells;         // row-major value indices, size n * columns
    std::size_t n = 0;

    int column_index(const std::string& name) const;  // -1 if absent
    int value(std::size_t row, std::size_t col) const {
        return cells[row * columns.size() + col];
    }
};

// Normalized joint frequency table over observed variables. Built either from
// a dataset (relative frequencies, total = n) or from an exact distribution
// (total = 0 marks an exact table).
struct FrequencyTable {
    std::vector<Variable> variables;
    std::vector<double> weights;  // dense, first variable slowest, sums to 1
    double total = 0;             // sample size when count-based, 0 when exact

    int var_index(const std::string& name) const;
    // Joint weight of all cells matching the partial index assignment
    // (pairs of variable index, value index).
    double mass(const std::vector<std::pair<int, int>>& fixed) const;
};

struct Cpt {
    std::string target;
    std::vector<std::string> conditioning;  // ordered
    Variable target_var;
    std::vector<Variable> conditioning_vars;
    // table[cell * |target domain| + t], cell = mixed-radix conditioning index.
    std::vector<double> table;
    std::vector<double> support;            // weight mass per conditioning cell
    std::vector<std::size_t> empty_cells;   // conditioning cells with zero support

    std::size_t cell_index(const std::vector<int>& cond_values) const;
};

struct EstimateWithCi {
    double point = 0;
    double lower = 0;
    double upper = 0;
    double level = 0.95;
    std::size_t replicates = 0;        // successful replicates used
    std::size_t failed_replicates = 0;
    std::uint64_t seed = 0;
    bool point_in_interval = true;     // percentile intervals may exclude the
                                       // point estimate on pathological
                                       // resamples; flagged, not an error
};

// --- dataset I/O and sampling ----------------------------------------------------

// CSV with a header row; the sidecar schema JSON declares column domains
// ({"columns": {name: [values...]}, "numeric": {name: {value: number}}}).
Dataset load_dataset_csv(const std::string& csv_path, const std::string& schema_path);
void write_dataset_csv(const Dataset& data, const std::string& path);

// Forward-sample n observations of the endogenous variables (deterministic
// under the seed).
Dataset sample_dataset(const Scm& scm, std::size_t n, std::uint64_t seed);

FrequencyTable table_from_dataset(const Dataset& data);
FrequencyTable table_from_distribution(const Distribution& joint);

// --- CPTs and plug-in formulas -----------------------------------------------------

// Relative frequencies with optional additive smoothing; zero-support
// conditioning cells are flagged, never an error here.
Cpt fit_cpt(const Dataset& data, const std::string& target,
            const std::vector<std::string>& conditioning, double smoothing = 0.0);
Cpt fit_cpt(const FrequencyTable& table, const std::string& target,
            const std::vector<std::string>& conditioning, double smoothing = 0.0);

// Plug-in evaluation of the prefix adjustment formula
//   sum_z P(y | z, x) P(z_rest | x, z_prefix) P(z_prefix)
// over the topological confounder order, where z_prefix is the first
// `prefix_len` confounders. Requires a diagram with no bidirected edges.
// Positive-weight strata with no treated observations raise an
// "empty stratum" error listing the strata.
double estimate_pa_markov(const FrequencyTable& table, const CausalDiagram& d,
                          const Assignment& x, const OutcomeQuery& y, std::size_t prefix_len,
                          double smoothing = 0.0);

// Plug-in anchor adjustment sum_{z_s} P(y | x, z_s) P(z_s) for the anchor set
// of u_set. Refused (NotIdentifiedError, reasons attached) unless
// check_identifiable passes; `force_formula` computes it anyway.
double estimate_pa_anchor(const FrequencyTable& table, const CausalDiagram& d,
                          const Assignment& x, const OutcomeQuery& y, const NameSet& u_set,
                          double smoothing = 0.0, bool force_formula = false);

// Full decomposition from data: consecutive differences of the identified
// prefix values. mode: "markovian" | "semi-markovian" | "auto".
DecompositionReport estimate_decomposition(const FrequencyTable& table, const CausalDiagram& d,
                                           const Assignment& x, const OutcomeQuery& y,
                                           const std::string& mode = "auto",
                                           const std::optional<std::vector<std::string>>& order =
                                               std::nullopt,
                                           double smoothing = 0.0, bool force_formula = false);

// --- bootstrap ---------------------------------------------------------------------

// Nonparametric row resampling with replacement; percentile interval.
// Replicate r draws from a deterministic stream derived from (seed, r), so
// serial and parallel execution produce identical intervals. Replicates where
// the estimator throws are skipped and counted; more than 20% failures is an
// error.
EstimateWithCi bootstrap_ci(const Dataset& data,
                            const std::function<double(const Dataset&)>& estimator,
                            std::size_t replicates, double level, std::uint64_t seed);

// Vector-valued variant evaluating all components on each resample (one
// resample per replicate, shared across components).
std::vector<EstimateWithCi> bootstrap_ci_vector(
    const Dataset& data, const std::function<std::vector<double>(const Dataset&)>& estimator,
    std::size_t replicates, double level, std::uint64_t seed);

}  // namespace spurdec
