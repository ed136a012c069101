#include "spurdec/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "spurdec/rng.hpp"

namespace spurdec {

namespace {

constexpr std::uint64_t kTableCellCap = std::uint64_t{1} << 28;

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

const std::string& single_treatment(const Assignment& x) {
    if (x.size() != 1) {
        throw std::invalid_argument(
            "estimation requires a single treatment variable; got " + std::to_string(x.size()));
    }
    return x.begin()->first;
}

std::string join_names(const std::vector<std::string>& names, const char* sep = ",") {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) {
            out += sep;
        }
        out += n;
    }
    return out;
}

// Resolved handle into a frequency table column.
struct Col {
    int index = -1;
    const Variable* var = nullptr;
};

Col resolve_column(const FrequencyTable& table, const std::string& name) {
    int i = table.var_index(name);
    if (i < 0) {
        throw std::invalid_argument("variable '" + name + "' is not a column of the data table");
    }
    return Col{i, &table.variables[i]};
}

int resolve_value(const Col& c, const std::string& value) {
    int v = c.var->index_of(value);
    if (v < 0) {
        throw std::invalid_argument("value '" + value + "' is not in the declared domain of '" +
                                    c.var->name + "'");
    }
    return v;
}

std::string describe_cells(const FrequencyTable& table,
                           std::vector<std::pair<int, int>> fixed) {
    std::sort(fixed.begin(), fixed.end(), [&](const auto& a, const auto& b) {
        return table.variables[a.first].name < table.variables[b.first].name;
    });
    std::string out = "{";
    bool first = true;
    for (const auto& [vi, val] : fixed) {
        if (!first) {
            out += ", ";
        }
        first = false;
        out += table.variables[vi].name + "=" + table.variables[vi].domain[val];
    }
    return out + "}";
}

// Counts (sample counts when the table is count-based, raw probability mass
// otherwise) so that additive smoothing has its usual meaning.
struct CountView {
    const FrequencyTable* table;
    double scale;

    explicit CountView(const FrequencyTable& t)
        : table(&t), scale(t.total > 0 ? t.total : 1.0) {}

    double count(const std::vector<std::pair<int, int>>& fixed) const {
        return table->mass(fixed) * scale;
    }
};

// Numerator / denominator of the (smoothed) outcome factor given the fixed
// conditioning cells: P(y | fixed) in event form, E[Y | fixed] otherwise.
// Returns false when the denominator is zero (empty stratum, no smoothing).
bool outcome_factor(const CountView& view, const Col& ycol, const OutcomeQuery& y,
                    std::vector<std::pair<int, int>>& fixed, double smoothing, double& out) {
    const auto k = ycol.var->domain.size();
    double den = view.count(fixed) + smoothing * static_cast<double>(k);
    if (den <= 0) {
        return false;
    }
    fixed.emplace_back(ycol.index, 0);
    double num = 0;
    if (y.value) {
        fixed.back().second = resolve_value(ycol, *y.value);
        num = view.count(fixed) + smoothing;
    } else {
        if (!ycol.var->has_numeric) {
            throw std::invalid_argument("outcome '" + ycol.var->name +
                                        "' has no numeric encoding, so the expectation form is "
                                        "unavailable");
        }
        for (std::size_t t = 0; t < k; ++t) {
            fixed.back().second = static_cast<int>(t);
            num += ycol.var->numeric[t] * (view.count(fixed) + smoothing);
        }
    }
    fixed.pop_back();
    out = num / den;
    return true;
}

[[noreturn]] void throw_empty_strata(const std::vector<std::string>& strata) {
    throw std::runtime_error(
        "empty stratum: no observations for " + join_names(strata, "; ") +
        "; increase the sample, coarsen the domains, or enable additive smoothing");
}

// Prefix adjustment value for an explicit confounder order (the public
// estimate_pa_markov uses the diagram's canonical order).
double pa_markov_value(const FrequencyTable& table, const Assignment& x, const OutcomeQuery& y,
                       const std::vector<std::string>& z_order, std::size_t prefix_len,
                       double smoothing) {
    if (smoothing < 0) {
        throw std::invalid_argument("smoothing must be >= 0");
    }
    if (prefix_len > z_order.size()) {
        throw std::invalid_argument("prefix length " + std::to_string(prefix_len) +
                                    " exceeds the confounder count " +
                                    std::to_string(z_order.size()));
    }
    CountView view(table);
    const std::string& treat = single_treatment(x);
    Col xcol = resolve_column(table, treat);
    int xval = resolve_value(xcol, x.at(treat));
    Col ycol = resolve_column(table, y.variable);

    std::vector<Col> zcols;
    double rest_cells = 1;
    double prefix_cells = 1;
    for (std::size_t i = 0; i < z_order.size(); ++i) {
        zcols.push_back(resolve_column(table, z_order[i]));
        (i < prefix_len ? prefix_cells : rest_cells) *=
            static_cast<double>(zcols.back().var->domain.size());
    }

    const double total_count = view.count({});
    std::vector<int> zv(zcols.size(), 0);
    std::vector<std::pair<int, int>> fixed;
    std::vector<std::string> empty_strata;
    double acc = 0;
    while (true) {
        // P(z_prefix)
        fixed.clear();
        for (std::size_t i = 0; i < prefix_len; ++i) {
            fixed.emplace_back(zcols[i].index, zv[i]);
        }
        double w = (view.count(fixed) + smoothing) / (total_count + smoothing * prefix_cells);
        if (w > 0) {
            double prod = w;
            bool alive = true;
            if (prefix_len < zcols.size()) {
                // P(z_rest | x, z_prefix)
                fixed.emplace_back(xcol.index, xval);
                double den = view.count(fixed) + smoothing * rest_cells;
                if (den <= 0) {
                    empty_strata.push_back(describe_cells(table, fixed));
                    alive = false;
                } else {
                    for (std::size_t i = prefix_len; i < zcols.size(); ++i) {
                        fixed.emplace_back(zcols[i].index, zv[i]);
                    }
                    prod *= (view.count(fixed) + smoothing) / den;
                    if (prod == 0) {
                        alive = false;
                    }
                }
            } else {
                fixed.emplace_back(xcol.index, xval);
            }
            if (alive) {
                // fixed now holds the full (z, x) cell.
                double f = 0;
                if (outcome_factor(view, ycol, y, fixed, smoothing, f)) {
                    acc += prod * f;
                } else {
                    empty_strata.push_back(describe_cells(table, fixed));
                }
            }
        }
        // Next joint confounder value (first variable slowest).
        bool wrapped = true;
        for (std::size_t j = zcols.size(); j-- > 0;) {
            if (++zv[j] < static_cast<int>(zcols[j].var->domain.size())) {
                wrapped = false;
                break;
            }
            zv[j] = 0;
        }
        if (wrapped) {
            break;
        }
    }
    if (!empty_strata.empty()) {
        throw_empty_strata(empty_strata);
    }
    return acc;
}

// Anchor adjustment sum over an explicit anchor set.
double anchor_value(const FrequencyTable& table, const Assignment& x, const OutcomeQuery& y,
                    const std::vector<std::string>& anchors, double smoothing) {
    if (smoothing < 0) {
        throw std::invalid_argument("smoothing must be >= 0");
    }
    CountView view(table);
    const std::string& treat = single_treatment(x);
    Col xcol = resolve_column(table, treat);
    int xval = resolve_value(xcol, x.at(treat));
    Col ycol = resolve_column(table, y.variable);

    std::vector<Col> zcols;
    double anchor_cells = 1;
    for (const auto& z : anchors) {
        zcols.push_back(resolve_column(table, z));
        anchor_cells *= static_cast<double>(zcols.back().var->domain.size());
    }

    const double total_count = view.count({});
    std::vector<int> zv(zcols.size(), 0);
    std::vector<std::pair<int, int>> fixed;
    std::vector<std::string> empty_strata;
    double acc = 0;
    while (true) {
        fixed.clear();
        for (std::size_t i = 0; i < zcols.size(); ++i) {
            fixed.emplace_back(zcols[i].index, zv[i]);
        }
        double w = (view.count(fixed) + smoothing) / (total_count + smoothing * anchor_cells);
        if (w > 0) {
            fixed.emplace_back(xcol.index, xval);
            double f = 0;
            if (outcome_factor(view, ycol, y, fixed, smoothing, f)) {
                acc += w * f;
            } else {
                empty_strata.push_back(describe_cells(table, fixed));
            }
        }
        bool wrapped = true;
        for (std::size_t j = zcols.size(); j-- > 0;) {
            if (++zv[j] < static_cast<int>(zcols[j].var->domain.size())) {
                wrapped = false;
                break;
            }
            zv[j] = 0;
        }
        if (wrapped) {
            break;
        }
    }
    if (!empty_strata.empty()) {
        throw_empty_strata(empty_strata);
    }
    return acc;
}

std::vector<std::string> exogenous_parents_sorted(const CausalDiagram& d, const std::string& z) {
    std::vector<std::string> out;
    for (const auto& p : d.parents(z)) {
        if (d.is_exogenous(p)) {
            out.push_back(p);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

// --- Dataset / FrequencyTable ------------------------------------------------------

int Dataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int FrequencyTable::var_index(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

double FrequencyTable::mass(const std::vector<std::pair<int, int>>& fixed) const {
    std::vector<std::uint64_t> stride(variables.size(), 1);
    for (std::size_t i = variables.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * variables[i].domain.size();
    }
    double acc = 0;
    for (std::uint64_t flat = 0; flat < weights.size(); ++flat) {
        if (weights[flat] == 0) {
            continue;
        }
        bool match = true;
        for (const auto& [vi, val] : fixed) {
            if (static_cast<int>((flat / stride[vi]) % variables[vi].domain.size()) != val) {
                match = false;
                break;
            }
        }
        if (match) {
            acc += weights[flat];
        }
    }
    return acc;
}

Dataset load_dataset_csv(const std::string& csv_path, const std::string& schema_path) {
    std::ifstream schema_in(schema_path, std::ios::binary);
    if (!schema_in) {
        throw std::runtime_error("cannot open schema file: " + schema_path);
    }
    nlohmann::ordered_json schema;
    try {
        schema = nlohmann::ordered_json::parse(schema_in);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("schema JSON parse error: ") + e.what());
    }
    if (!schema.contains("columns") || !schema["columns"].is_object()) {
        throw std::invalid_argument("schema must contain a 'columns' object");
    }

    std::ifstream in(csv_path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open dataset file: " + csv_path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("dataset CSV is empty: " + csv_path);
    }
    auto header = split_fields(line);

    Dataset data;
    std::set<std::string> seen;
    for (const auto& name : header) {
        if (!seen.insert(name).second) {
            throw std::invalid_argument("duplicate column '" + name + "' in CSV header");
        }
        if (!schema["columns"].contains(name)) {
            throw std::invalid_argument("column '" + name + "' is not declared in the schema");
        }
        Variable v;
        v.name = name;
        for (const auto& label : schema["columns"][name]) {
            if (label.is_string()) {
                v.domain.push_back(label.get<std::string>());
            } else if (label.is_number_integer()) {
                v.domain.push_back(std::to_string(label.get<long long>()));
            } else {
                throw std::invalid_argument("domain values for column '" + name +
                                            "' must be strings or integers");
            }
        }
        if (v.domain.empty()) {
            throw std::invalid_argument("column '" + name + "' has an empty domain");
        }
        std::set<std::string> uniq(v.domain.begin(), v.domain.end());
        if (uniq.size() != v.domain.size()) {
            throw std::invalid_argument("column '" + name + "' has duplicate domain values");
        }
        v.numeric.assign(v.domain.size(), std::nan(""));
        v.has_numeric = true;
        if (schema.contains("numeric") && schema["numeric"].contains(name)) {
            const auto& enc = schema["numeric"][name];
            for (std::size_t i = 0; i < v.domain.size(); ++i) {
                if (!enc.contains(v.domain[i])) {
                    throw std::invalid_argument("numeric encoding for column '" + name +
                                                "' is missing value '" + v.domain[i] + "'");
                }
                v.numeric[i] = enc[v.domain[i]].get<double>();
            }
        } else {
            for (std::size_t i = 0; i < v.domain.size(); ++i) {
                if (!parse_number(v.domain[i], v.numeric[i])) {
                    v.has_numeric = false;
                    break;
                }
            }
            if (!v.has_numeric) {
                v.numeric.assign(v.domain.size(), std::nan(""));
            }
        }
        data.columns.push_back(std::move(v));
    }

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != data.columns.size()) {
            throw std::invalid_argument("row " + std::to_string(row_no) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(data.columns.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            int idx = data.columns[c].index_of(fields[c]);
            if (idx < 0) {
                throw std::invalid_argument("row " + std::to_string(row_no) + ", column '" +
                                            data.columns[c].name + "': value '" + fields[c] +
                                            "' is not in the declared domain");
            }
            data.cells.push_back(idx);
        }
        ++data.n;
    }
    if (data.n == 0) {
        throw std::invalid_argument("dataset has no data rows: " + csv_path);
    }
    return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    for (std::size_t c = 0; c < data.columns.size(); ++c) {
        out << (c ? "," : "") << data.columns[c].name;
    }
    out << "\n";
    for (std::size_t r = 0; r < data.n; ++r) {
        for (std::size_t c = 0; c < data.columns.size(); ++c) {
            out << (c ? "," : "") << data.columns[c].domain[data.value(r, c)];
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("failed while writing: " + path);
    }
}

Dataset sample_dataset(const Scm& scm, std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample size must be >= 1");
    }
    Dataset data;
    data.columns = scm.endogenous();
    data.n = n;
    data.cells.reserve(n * data.columns.size());

    SplitMix64 rng(seed);
    std::vector<int> u(scm.exogenous().size(), 0);
    std::vector<int> v(data.columns.size(), 0);
    const std::vector<int> no_do(data.columns.size(), -1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < u.size(); ++j) {
            const auto& probs = scm.exogenous_dists()[j].probabilities;
            double draw = rng.next_double();
            double acc = 0;
            int pick = static_cast<int>(probs.size()) - 1;
            for (std::size_t t = 0; t < probs.size(); ++t) {
                acc += probs[t];
                if (draw < acc) {
                    pick = static_cast<int>(t);
                    break;
                }
            }
            u[j] = pick;
        }
        scm.evaluate_indexed(u, no_do, v);
        data.cells.insert(data.cells.end(), v.begin(), v.end());
    }
    return data;
}

FrequencyTable table_from_dataset(const Dataset& data) {
    if (data.n == 0) {
        throw std::invalid_argument("cannot build a frequency table from an empty dataset");
    }
    FrequencyTable t;
    t.variables = data.columns;
    std::uint64_t cells = 1;
    for (const auto& v : t.variables) {
        cells *= v.domain.size();
        if (cells > kTableCellCap) {
            throw std::runtime_error("joint domain of the dataset exceeds the table cap (2^28)");
        }
    }
    std::vector<std::uint64_t> stride(t.variables.size(), 1);
    for (std::size_t i = t.variables.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * t.variables[i].domain.size();
    }
    // Integer counts first: bitwise-identical tables for any accumulation order.
    std::vector<std::uint64_t> counts(cells, 0);
    const std::size_t cols = t.variables.size();
    for (std::size_t r = 0; r < data.n; ++r) {
        std::uint64_t flat = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            flat += static_cast<std::uint64_t>(data.cells[r * cols + c]) * stride[c];
        }
        ++counts[flat];
    }
    t.weights.resize(cells);
    const double inv = 1.0 / static_cast<double>(data.n);
    for (std::uint64_t i = 0; i < cells; ++i) {
        t.weights[i] = static_cast<double>(counts[i]) * inv;
    }
    t.total = static_cast<double>(data.n);
    return t;
}

FrequencyTable table_from_distribution(const Distribution& joint) {
    FrequencyTable t;
    t.variables = joint.variables;
    t.weights = joint.probs;
    t.total = 0;
    double sum = 0;
    for (double w : t.weights) {
        if (w < 0) {
            throw std::invalid_argument("distribution has negative mass");
        }
        sum += w;
    }
    if (sum <= 0) {
        throw std::invalid_argument("distribution has no mass");
    }
    for (double& w : t.weights) {
        w /= sum;
    }
    return t;
}

// --- CPTs -----------------------------------------------------------------------

std::size_t Cpt::cell_index(const std::vector<int>& cond_values) const {
    if (cond_values.size() != conditioning_vars.size()) {
        throw std::invalid_argument("conditioning value count mismatch");
    }
    std::size_t cell = 0;
    for (std::size_t i = 0; i < conditioning_vars.size(); ++i) {
        cell = cell * conditioning_vars[i].domain.size() + static_cast<std::size_t>(cond_values[i]);
    }
    return cell;
}

namespace {

Cpt normalize_cpt(Cpt cpt, std::vector<double> counts, double smoothing) {
    const std::size_t k = cpt.target_var.domain.size();
    const std::size_t cells = counts.size() / k;
    cpt.table.assign(counts.size(), 0.0);
    cpt.support.assign(cells, 0.0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        double sum = 0;
        for (std::size_t t = 0; t < k; ++t) {
            sum += counts[cell * k + t];
        }
        cpt.support[cell] = sum;
        if (sum == 0) {
            cpt.empty_cells.push_back(cell);
        }
        double den = sum + smoothing * static_cast<double>(k);
        if (den > 0) {
            for (std::size_t t = 0; t < k; ++t) {
                cpt.table[cell * k + t] = (counts[cell * k + t] + smoothing) / den;
            }
        }
    }
    return cpt;
}

Cpt cpt_shell(const std::vector<Variable>& vars, const std::string& target,
              const std::vector<std::string>& conditioning, double smoothing,
              std::size_t& cells_out) {
    if (smoothing < 0) {
        throw std::invalid_argument("smoothing must be >= 0");
    }
    Cpt cpt;
    cpt.target = target;
    cpt.conditioning = conditioning;
    auto find = [&](const std::string& name) -> const Variable& {
        for (const auto& v : vars) {
            if (v.name == name) {
                return v;
            }
        }
        throw std::invalid_argument("variable '" + name + "' is not a column of the data");
    };
    cpt.target_var = find(target);
    std::set<std::string> seen{target};
    std::size_t cells = 1;
    for (const auto& c : conditioning) {
        if (!seen.insert(c).second) {
            throw std::invalid_argument("variable '" + c +
                                        "' appears twice in the CPT specification");
        }
        cpt.conditioning_vars.push_back(find(c));
        cells *= cpt.conditioning_vars.back().domain.size();
        if (cells > kTableCellCap) {
            throw std::runtime_error("CPT conditioning domain exceeds the cap (2^28)");
        }
    }
    cells_out = cells;
    return cpt;
}

}  // namespace

Cpt fit_cpt(const Dataset& data, const std::string& target,
            const std::vector<std::string>& conditioning, double smoothing) {
    std::size_t cells = 1;
    Cpt cpt = cpt_shell(data.columns, target, conditioning, smoothing, cells);
    const std::size_t k = cpt.target_var.domain.size();
    int ti = data.column_index(target);
    std::vector<int> ci;
    for (const auto& c : conditioning) {
        ci.push_back(data.column_index(c));
    }
    std::vector<double> counts(cells * k, 0.0);
    std::vector<int> cond_values(conditioning.size(), 0);
    for (std::size_t r = 0; r < data.n; ++r) {
        for (std::size_t i = 0; i < ci.size(); ++i) {
            cond_values[i] = data.value(r, ci[i]);
        }
        counts[cpt.cell_index(cond_values) * k + data.value(r, ti)] += 1.0;
    }
    return normalize_cpt(std::move(cpt), std::move(counts), smoothing);
}

Cpt fit_cpt(const FrequencyTable& table, const std::string& target,
            const std::vector<std::string>& conditioning, double smoothing) {
    std::size_t cells = 1;
    Cpt cpt = cpt_shell(table.variables, target, conditioning, smoothing, cells);
    const std::size_t k = cpt.target_var.domain.size();
    const double scale = table.total > 0 ? table.total : 1.0;

    std::vector<std::uint64_t> stride(table.variables.size(), 1);
    for (std::size_t i = table.variables.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * table.variables[i].domain.size();
    }
    int ti = table.var_index(target);
    std::vector<int> ci;
    for (const auto& c : conditioning) {
        ci.push_back(table.var_index(c));
    }
    std::vector<double> counts(cells * k, 0.0);
    std::vector<int> cond_values(conditioning.size(), 0);
    for (std::uint64_t flat = 0; flat < table.weights.size(); ++flat) {
        if (table.weights[flat] == 0) {
            continue;
        }
        for (std::size_t i = 0; i < ci.size(); ++i) {
            cond_values[i] = static_cast<int>((flat / stride[ci[i]]) %
                                              table.variables[ci[i]].domain.size());
        }
        int t = static_cast<int>((flat / stride[ti]) % k);
        counts[cpt.cell_index(cond_values) * k + t] += table.weights[flat] * scale;
    }
    return normalize_cpt(std::move(cpt), std::move(counts), smoothing);
}

// --- identified plug-in estimators -----------------------------------------------

double estimate_pa_markov(const FrequencyTable& table, const CausalDiagram& d,
                          const Assignment& x, const OutcomeQuery& y, std::size_t prefix_len,
                          double smoothing) {
    if (!is_markovian(d)) {
        throw std::invalid_argument(
            "the prefix adjustment formula requires a diagram without bidirected edges");
    }
    const std::string& treat = single_treatment(x);
    auto z_order = confounders_in_topological_order(d, treat, y.variable);
    return pa_markov_value(table, x, y, z_order, prefix_len, smoothing);
}

double estimate_pa_anchor(const FrequencyTable& table, const CausalDiagram& d,
                          const Assignment& x, const OutcomeQuery& y, const NameSet& u_set,
                          double smoothing, bool force_formula) {
    const std::string& treat = single_treatment(x);
    IdVerdict verdict = check_identifiable(d, u_set, treat, y.variable);
    if (!verdict.identifiable && !force_formula) {
        std::vector<std::string> us(u_set.begin(), u_set.end());
        throw NotIdentifiedError(
            "estimation refused: the partially-abducted value for the latent set {" +
                join_names(us) + "} is not established as identifiable from observational "
                                 "data: " +
                join_names(verdict.reasons, "; "),
            verdict.reasons);
    }
    return anchor_value(table, x, y, verdict.anchor, smoothing);
}

DecompositionReport estimate_decomposition(const FrequencyTable& table, const CausalDiagram& d,
                                           const Assignment& x, const OutcomeQuery& y,
                                           const std::string& mode,
                                           const std::optional<std::vector<std::string>>& order,
                                           double smoothing, bool force_formula) {
    const std::string& treat = single_treatment(x);
    std::string resolved = mode;
    if (resolved == "auto") {
        resolved = is_markovian(d) ? "markovian" : "semi-markovian";
    }

    DecompositionReport rep;
    if (resolved == "markovian") {
        if (!is_markovian(d)) {
            throw std::invalid_argument(
                "markovian mode requires a diagram without bidirected edges; use "
                "semi-markovian mode");
        }
        auto def_order = confounders_in_topological_order(d, treat, y.variable);
        std::vector<std::string> z_order = def_order;
        if (order) {
            // Accept confounder names or their latent parents.
            std::map<std::string, std::string> latent_to_z;
            for (const auto& z : def_order) {
                for (const auto& u : exogenous_parents_sorted(d, z)) {
                    latent_to_z[u] = z;
                }
            }
            std::vector<std::string> as_confounders;
            bool all_latents = !order->empty();
            for (const auto& n : *order) {
                if (!latent_to_z.count(n)) {
                    all_latents = false;
                    break;
                }
            }
            if (all_latents) {
                for (const auto& n : *order) {
                    const auto& z = latent_to_z[n];
                    if (std::find(as_confounders.begin(), as_confounders.end(), z) ==
                        as_confounders.end()) {
                        as_confounders.push_back(z);
                    }
                }
            } else {
                as_confounders = *order;
            }
            // Non-topological orders are always refused on the estimation
            // path: two models with identical observational distributions can
            // disagree on the out-of-order prefix values.
            z_order = confounders_in_topological_order(d, treat, y.variable, as_confounders);
        }
        rep.mode = "markovian";
        rep.baseline = pa_markov_value(table, x, y, z_order, 0, smoothing);
        double prev = rep.baseline;
        for (std::size_t i = 0; i < z_order.size(); ++i) {
            auto latents = exogenous_parents_sorted(d, z_order[i]);
            for (const auto& u : latents) {
                rep.ordering.push_back(u);
            }
            double cur = pa_markov_value(table, x, y, z_order, i + 1, smoothing);
            rep.contributions.push_back(Contribution{join_names(latents), prev - cur});
            prev = cur;
        }
        rep.endpoint = prev;
    } else if (resolved == "semi-markovian") {
        auto tops = tops_of_spurious_treks(d, treat, y.variable);
        std::vector<std::string> u_order = tops;
        if (order) {
            std::set<std::string> expect(tops.begin(), tops.end());
            std::set<std::string> got(order->begin(), order->end());
            if (expect != got || order->size() != tops.size()) {
                throw std::invalid_argument(
                    "latent order must be a permutation of the tops of spurious treks {" +
                    join_names(tops) + "}");
            }
            u_order = *order;
        }
        rep.mode = "semi-markovian";
        rep.baseline = estimate_pa_anchor(table, d, x, y, {}, smoothing, force_formula);
        NameSet prefix;
        double prev = rep.baseline;
        for (const auto& u : u_order) {
            prefix.insert(u);
            rep.ordering.push_back(u);
            double cur;
            try {
                cur = estimate_pa_anchor(table, d, x, y, prefix, smoothing, force_formula);
            } catch (const NotIdentifiedError& e) {
                std::vector<std::string> ps(prefix.begin(), prefix.end());
                throw NotIdentifiedError("decomposition refused at prefix {" + join_names(ps) +
                                             "}: " + e.what(),
                                         e.reasons());
            }
            rep.contributions.push_back(Contribution{u, prev - cur});
            prev = cur;
        }
        rep.endpoint = prev;
    } else {
        throw std::invalid_argument("mode must be 'markovian', 'semi-markovian' or 'auto'");
    }

    double sum = 0;
    for (const auto& c : rep.contributions) {
        sum += c.value;
    }
    rep.total = rep.baseline - rep.endpoint;
    rep.residual = rep.total - sum;
    return rep;
}

// --- bootstrap ---------------------------------------------------------------------

namespace {

double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        throw std::logic_error("percentile of empty sample");
    }
    if (sorted.size() == 1) {
        return sorted[0];
    }
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto idx = static_cast<std::size_t>(pos);
    if (idx + 1 >= sorted.size()) {
        return sorted.back();
    }
    double frac = pos - static_cast<double>(idx);
    return sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]);
}

}  // namespace

std::vector<EstimateWithCi> bootstrap_ci_vector(
    const Dataset& data, const std::function<std::vector<double>(const Dataset&)>& estimator,
    std::size_t replicates, double level, std::uint64_t seed) {
    if (replicates < 1) {
        throw std::invalid_argument("bootstrap replicates must be >= 1");
    }
    if (!(level > 0 && level < 1)) {
        throw std::invalid_argument("confidence level must lie strictly between 0 and 1");
    }
    if (data.n == 0) {
        throw std::invalid_argument("dataset has no rows");
    }

    std::vector<double> point = estimator(data);
    const std::size_t m = point.size();
    std::vector<std::vector<double>> samples(m);
    for (auto& s : samples) {
        s.reserve(replicates);
    }

    Dataset resample;
    resample.columns = data.columns;
    resample.n = data.n;
    resample.cells.resize(data.cells.size());
    const std::size_t cols = data.columns.size();

    std::size_t failed = 0;
    std::string last_error;
    for (std::size_t r = 0; r < replicates; ++r) {
        SplitMix64 rng = SplitMix64::stream(seed, r);
        for (std::size_t i = 0; i < data.n; ++i) {
            std::uint64_t row = rng.next_below(data.n);
            std::copy_n(data.cells.begin() + static_cast<std::ptrdiff_t>(row * cols), cols,
                        resample.cells.begin() + static_cast<std::ptrdiff_t>(i * cols));
        }
        std::vector<double> values;
        bool ok = true;
        try {
            values = estimator(resample);
        } catch (const std::exception& e) {
            ok = false;
            ++failed;
            last_error = e.what();
        }
        if (ok) {
            if (values.size() != m) {
                throw std::logic_error("bootstrap estimator returned an inconsistent number of "
                                       "components");
            }
            for (std::size_t c = 0; c < m; ++c) {
                samples[c].push_back(values[c]);
            }
        }
    }
    if (failed * 5 > replicates) {
        throw std::runtime_error("bootstrap aborted: " + std::to_string(failed) + " of " +
                                 std::to_string(replicates) +
                                 " replicates failed (more than 20%); last failure: " +
                                 last_error);
    }

    const double alpha = 1.0 - level;
    std::vector<EstimateWithCi> out(m);
    for (std::size_t c = 0; c < m; ++c) {
        std::sort(samples[c].begin(), samples[c].end());
        EstimateWithCi& e = out[c];
        e.point = point[c];
        e.lower = percentile(samples[c], alpha / 2);
        e.upper = percentile(samples[c], 1 - alpha / 2);
        e.level = level;
        e.replicates = samples[c].size();
        e.failed_replicates = failed;
        e.seed = seed;
        e.point_in_interval = e.lower <= e.point && e.point <= e.upper;
    }
    return out;
}

EstimateWithCi bootstrap_ci(const Dataset& data,
                            const std::function<double(const Dataset&)>& estimator,
                            std::size_t replicates, double level, std::uint64_t seed) {
    auto vec = bootstrap_ci_vector(
        data,
        [&](const Dataset& sample) { return std::vector<double>{estimator(sample)}; },
        replicates, level, seed);
    return vec[0];
}

}  // namespace spurdec
