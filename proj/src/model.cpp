#include "spurdec/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "spurdec/expr.hpp"

namespace spurdec {

namespace {

constexpr double kDistributionTolerance = 1e-9;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

using ordered_json = nlohmann::ordered_json;

bool valid_identifier(const std::string& s) {
    if (s.empty()) {
        return false;
    }
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') {
        return false;
    }
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') {
            return false;
        }
    }
    return true;
}

void check_label(const std::string& label, const std::string& context) {
    if (label.empty() || label.find_first_of(",\n\r\"") != std::string::npos) {
        throw std::invalid_argument(context + ": invalid value label \"" + label + "\"");
    }
}

// Converts a JSON domain entry to (label, numeric): integers keep their value
// as the numeric encoding, strings default to no numeric encoding.
std::pair<std::string, double> domain_entry(const ordered_json& j, const std::string& var) {
    if (j.is_number_integer()) {
        long long v = j.get<long long>();
        return {std::to_string(v), static_cast<double>(v)};
    }
    if (j.is_string()) {
        return {j.get<std::string>(), kNaN};
    }
    throw std::invalid_argument("variable '" + var +
                                "': domain values must be integers or strings");
}

std::string value_to_label(const ordered_json& j, const std::string& context) {
    if (j.is_number_integer()) {
        return std::to_string(j.get<long long>());
    }
    if (j.is_string()) {
        return j.get<std::string>();
    }
    throw std::invalid_argument(context + ": values must be integers or strings");
}

std::vector<std::string> split_key(const std::string& key) {
    std::vector<std::string> parts;
    if (key.empty()) {
        return parts;
    }
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = key.find(',', start);
        if (pos == std::string::npos) {
            parts.push_back(key.substr(start));
            return parts;
        }
        parts.push_back(key.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

// --- Variable / Distribution ---------------------------------------------------

int Variable::index_of(const std::string& value) const {
    for (std::size_t i = 0; i < domain.size(); ++i) {
        if (domain[i] == value) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

namespace {

std::vector<std::pair<int, int>> resolve_in(const std::vector<Variable>& vars,
                                            const Assignment& a, const char* kind) {
    std::vector<std::pair<int, int>> out;
    out.reserve(a.size());
    for (const auto& [name, value] : a) {
        int vi = -1;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            if (vars[i].name == name) {
                vi = static_cast<int>(i);
                break;
            }
        }
        if (vi < 0) {
            throw std::invalid_argument(std::string("unknown ") + kind + " variable '" + name +
                                        "'");
        }
        int di = vars[vi].index_of(value);
        if (di < 0) {
            throw std::invalid_argument("value '" + value + "' not in domain of '" + name + "'");
        }
        out.emplace_back(vi, di);
    }
    return out;
}

}  // namespace

double Distribution::total() const {
    double t = 0;
    for (double p : probs) {
        t += p;
    }
    return t;
}

double Distribution::prob(const Assignment& event) const {
    auto fixed = resolve_in(variables, event, "endogenous");
    std::vector<std::size_t> stride(variables.size(), 1);
    for (std::size_t i = variables.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * variables[i].domain.size();
    }
    double sum = 0;
    for (std::size_t flat = 0; flat < probs.size(); ++flat) {
        bool match = true;
        for (const auto& [vi, di] : fixed) {
            if (static_cast<int>((flat / stride[vi]) % variables[vi].domain.size()) != di) {
                match = false;
                break;
            }
        }
        if (match) {
            sum += probs[flat];
        }
    }
    return sum;
}

double Distribution::conditional_prob(const Assignment& event, const Assignment& given) const {
    double den = prob(given);
    if (den <= 0) {
        throw std::runtime_error("impossible evidence: the conditioning event has probability 0");
    }
    Assignment both = given;
    for (const auto& [k, v] : event) {
        auto it = both.find(k);
        if (it != both.end() && it->second != v) {
            return 0.0;
        }
        both[k] = v;
    }
    return prob(both) / den;
}

double Distribution::expectation(const std::string& var) const {
    return conditional_expectation(var, {});
}

double Distribution::conditional_expectation(const std::string& var, const Assignment& given) const {
    int vi = -1;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == var) {
            vi = static_cast<int>(i);
            break;
        }
    }
    if (vi < 0) {
        throw std::invalid_argument("unknown endogenous variable '" + var + "'");
    }
    if (!variables[vi].has_numeric) {
        throw std::invalid_argument("variable '" + var +
                                    "' has no numeric encoding; expectation-form queries need one");
    }
    auto fixed = resolve_in(variables, given, "endogenous");
    std::vector<std::size_t> stride(variables.size(), 1);
    for (std::size_t i = variables.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * variables[i].domain.size();
    }
    double num = 0, den = 0;
    for (std::size_t flat = 0; flat < probs.size(); ++flat) {
        bool match = true;
        for (const auto& [fi, di] : fixed) {
            if (static_cast<int>((flat / stride[fi]) % variables[fi].domain.size()) != di) {
                match = false;
                break;
            }
        }
        if (!match) {
            continue;
        }
        int value = static_cast<int>((flat / stride[vi]) % variables[vi].domain.size());
        den += probs[flat];
        num += probs[flat] * variables[vi].numeric[value];
    }
    if (den <= 0) {
        throw std::runtime_error("impossible evidence: the conditioning event has probability 0");
    }
    return num / den;
}

// --- Scm -------------------------------------------------------------------------

Scm::Scm(std::vector<Variable> endogenous, std::vector<Variable> exogenous,
         std::vector<Mechanism> mechanisms, std::vector<ExogenousDistribution> dists)
    : endo_(std::move(endogenous)), exo_(std::move(exogenous)) {
    // Align mechanisms with endogenous order and distributions with exogenous order.
    mechs_.resize(endo_.size());
    std::vector<bool> have_mech(endo_.size(), false);
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        endo_idx_[endo_[i].name] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < exo_.size(); ++i) {
        exo_idx_[exo_[i].name] = static_cast<int>(i);
    }
    if (endo_idx_.size() != endo_.size() || exo_idx_.size() != exo_.size()) {
        throw std::invalid_argument("variable names must be unique");
    }
    for (const auto& [name, idx] : endo_idx_) {
        if (exo_idx_.count(name)) {
            throw std::invalid_argument("variable name '" + name +
                                        "' declared both endogenous and exogenous");
        }
        (void)idx;
    }
    for (auto& m : mechanisms) {
        auto it = endo_idx_.find(m.target);
        if (it == endo_idx_.end()) {
            throw std::invalid_argument("mechanism target '" + m.target +
                                        "' is not an endogenous variable");
        }
        if (have_mech[it->second]) {
            throw std::invalid_argument("duplicate mechanism for '" + m.target + "'");
        }
        have_mech[it->second] = true;
        mechs_[it->second] = std::move(m);
    }
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        if (!have_mech[i]) {
            throw std::invalid_argument("missing mechanism for '" + endo_[i].name + "'");
        }
    }
    dists_.resize(exo_.size());
    std::vector<bool> have_dist(exo_.size(), false);
    for (auto& d : dists) {
        auto it = exo_idx_.find(d.variable);
        if (it == exo_idx_.end()) {
            throw std::invalid_argument("distribution for unknown exogenous variable '" +
                                        d.variable + "'");
        }
        have_dist[it->second] = true;
        dists_[it->second] = std::move(d);
    }
    for (std::size_t i = 0; i < exo_.size(); ++i) {
        if (!have_dist[i]) {
            throw std::invalid_argument("missing distribution for exogenous variable '" +
                                        exo_[i].name + "'");
        }
    }
    validate();
}

void Scm::validate() {
    // Domains: nonempty, distinct labels.
    auto check_var = [](const Variable& v) {
        if (!valid_identifier(v.name)) {
            throw std::invalid_argument("invalid variable name '" + v.name + "'");
        }
        if (v.domain.empty()) {
            throw std::invalid_argument("variable '" + v.name + "' has an empty domain");
        }
        for (const auto& label : v.domain) {
            check_label(label, "variable '" + v.name + "'");
        }
        for (std::size_t i = 0; i < v.domain.size(); ++i) {
            for (std::size_t j = i + 1; j < v.domain.size(); ++j) {
                if (v.domain[i] == v.domain[j]) {
                    throw std::invalid_argument("variable '" + v.name +
                                                "' has duplicate domain value '" + v.domain[i] +
                                                "'");
                }
            }
        }
    };
    for (const auto& v : endo_) {
        check_var(v);
    }
    for (const auto& v : exo_) {
        check_var(v);
    }

    // Distributions: aligned size, nonnegative, normalized; zero entries warn.
    for (std::size_t i = 0; i < exo_.size(); ++i) {
        auto& d = dists_[i];
        if (d.probabilities.size() != exo_[i].domain.size()) {
            throw std::invalid_argument("distribution for '" + exo_[i].name +
                                        "' does not cover its domain");
        }
        double sum = 0;
        for (std::size_t k = 0; k < d.probabilities.size(); ++k) {
            double p = d.probabilities[k];
            if (p < 0 || !std::isfinite(p)) {
                throw std::invalid_argument("distribution for '" + exo_[i].name +
                                            "' has an invalid probability");
            }
            if (p == 0) {
                warnings_.push_back("exogenous variable '" + exo_[i].name +
                                    "' assigns probability 0 to value '" + exo_[i].domain[k] +
                                    "'");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kDistributionTolerance) {
            throw std::invalid_argument("distribution for '" + exo_[i].name +
                                        "' must sum to 1 (got " + std::to_string(sum) + ")");
        }
        for (auto& p : d.probabilities) {
            p /= sum;
        }
    }

    // Parent resolution, table shapes, strides.
    slots_.assign(endo_.size(), {});
    strides_.assign(endo_.size(), {});
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        const auto& m = mechs_[i];
        std::vector<int> slot;
        std::vector<std::size_t> sizes;
        for (const auto& p : m.parents) {
            auto it = endo_idx_.find(p);
            if (it == endo_idx_.end()) {
                throw std::invalid_argument("mechanism for '" + m.target +
                                            "': unknown endogenous parent '" + p + "'");
            }
            slot.push_back(it->second);
            sizes.push_back(endo_[it->second].domain.size());
        }
        for (const auto& p : m.exo_parents) {
            auto it = exo_idx_.find(p);
            if (it == exo_idx_.end()) {
                throw std::invalid_argument("mechanism for '" + m.target +
                                            "': unknown exogenous parent '" + p + "'");
            }
            slot.push_back(-(it->second + 1));
            sizes.push_back(exo_[it->second].domain.size());
        }
        std::size_t cells = 1;
        for (std::size_t s : sizes) {
            cells *= s;
        }
        if (m.table.size() != cells) {
            throw std::invalid_argument("mechanism for '" + m.target + "': table has " +
                                        std::to_string(m.table.size()) + " entries, expected " +
                                        std::to_string(cells));
        }
        for (int out : m.table) {
            if (out < 0 || out >= static_cast<int>(endo_[i].domain.size())) {
                throw std::invalid_argument("mechanism for '" + m.target +
                                            "': table output outside the target domain");
            }
        }
        std::vector<int> stride(sizes.size(), 1);
        for (std::size_t s = sizes.size(); s-- > 1;) {
            stride[s - 1] = stride[s] * static_cast<int>(sizes[s]);
        }
        slots_[i] = std::move(slot);
        strides_[i].assign(stride.begin(), stride.end());
    }

    // Acyclicity and topological order over endogenous mechanisms.
    std::vector<int> indegree(endo_.size(), 0);
    std::vector<std::vector<int>> out_edges(endo_.size());
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        for (int s : slots_[i]) {
            if (s >= 0) {
                out_edges[s].push_back(static_cast<int>(i));
                ++indegree[i];
            }
        }
    }
    std::vector<int> ready;
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        if (indegree[i] == 0) {
            ready.push_back(static_cast<int>(i));
        }
    }
    topo_.clear();
    while (!ready.empty()) {
        int v = ready.back();
        ready.pop_back();
        topo_.push_back(v);
        for (int w : out_edges[v]) {
            if (--indegree[w] == 0) {
                ready.push_back(w);
            }
        }
    }
    if (topo_.size() != endo_.size()) {
        throw std::invalid_argument("mechanism graph contains a cycle");
    }

    // Unused exogenous variables are allowed but flagged.
    std::vector<bool> used(exo_.size(), false);
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        for (int s : slots_[i]) {
            if (s < 0) {
                used[-(s + 1)] = true;
            }
        }
    }
    for (std::size_t i = 0; i < exo_.size(); ++i) {
        if (!used[i]) {
            warnings_.push_back("exogenous variable '" + exo_[i].name +
                                "' has no children (unused)");
        }
    }

    unit_count_ = 1;
    for (const auto& v : exo_) {
        if (unit_count_ > kEnumerationCap) {
            break;  // saturated; enumeration entry points reject it
        }
        unit_count_ *= v.domain.size();
    }
}

int Scm::endo_index(const std::string& name) const {
    auto it = endo_idx_.find(name);
    return it == endo_idx_.end() ? -1 : it->second;
}

int Scm::exo_index(const std::string& name) const {
    auto it = exo_idx_.find(name);
    return it == exo_idx_.end() ? -1 : it->second;
}

void Scm::decode_unit(std::uint64_t flat, std::vector<int>& u) const {
    u.resize(exo_.size());
    for (std::size_t i = exo_.size(); i-- > 0;) {
        std::uint64_t size = exo_[i].domain.size();
        u[i] = static_cast<int>(flat % size);
        flat /= size;
    }
}

double Scm::unit_weight(const std::vector<int>& u) const {
    double w = 1;
    for (std::size_t i = 0; i < exo_.size(); ++i) {
        w *= dists_[i].probabilities[u[i]];
    }
    return w;
}

void Scm::evaluate_indexed(const std::vector<int>& u, const std::vector<int>& do_values,
                           std::vector<int>& v) const {
    v.resize(endo_.size());
    for (int i : topo_) {
        if (!do_values.empty() && do_values[i] >= 0) {
            v[i] = do_values[i];
            continue;
        }
        const auto& slot = slots_[i];
        const auto& stride = strides_[i];
        std::size_t index = 0;
        for (std::size_t s = 0; s < slot.size(); ++s) {
            int value = slot[s] >= 0 ? v[slot[s]] : u[-(slot[s] + 1)];
            index += static_cast<std::size_t>(value) * stride[s];
        }
        v[i] = mechs_[i].table[index];
    }
}

std::vector<std::pair<int, int>> Scm::resolve_endo(const Assignment& a) const {
    return resolve_in(endo_, a, "endogenous");
}

std::vector<std::pair<int, int>> Scm::resolve_exo(const Assignment& a) const {
    return resolve_in(exo_, a, "exogenous");
}

double Scm::numeric_value(int endo_idx, int value_idx) const {
    const auto& v = endo_[endo_idx];
    if (!v.has_numeric) {
        throw std::invalid_argument("variable '" + v.name +
                                    "' has no numeric encoding; expectation-form queries need one");
    }
    return v.numeric[value_idx];
}

Assignment Scm::evaluate_unit(const Assignment& u) const {
    if (u.size() != exo_.size()) {
        for (const auto& v : exo_) {
            if (!u.count(v.name)) {
                throw std::invalid_argument("unbound exogenous variable '" + v.name + "'");
            }
        }
    }
    auto fixed = resolve_exo(u);
    if (fixed.size() != exo_.size()) {
        throw std::invalid_argument("unit must bind every exogenous variable exactly once");
    }
    std::vector<int> uu(exo_.size(), -1);
    for (const auto& [vi, di] : fixed) {
        uu[vi] = di;
    }
    std::vector<int> vv;
    evaluate_indexed(uu, {}, vv);
    Assignment out;
    for (std::size_t i = 0; i < endo_.size(); ++i) {
        out[endo_[i].name] = endo_[i].domain[vv[i]];
    }
    return out;
}

Scm Scm::submodel(const Assignment& intervention) const {
    for (const auto& [name, value] : intervention) {
        if (exo_idx_.count(name)) {
            throw std::invalid_argument("cannot intervene on exogenous variable '" + name + "'");
        }
        (void)value;
    }
    auto fixed = resolve_endo(intervention);
    std::vector<Mechanism> mechs = mechs_;
    for (const auto& [vi, di] : fixed) {
        mechs[vi] = Mechanism{endo_[vi].name, {}, {}, {di}};
    }
    return Scm(endo_, exo_, std::move(mechs), dists_);
}

std::string Scm::potential_response(const Assignment& u, const Assignment& intervention,
                                    const std::string& target) const {
    if (endo_index(target) < 0) {
        throw std::invalid_argument("unknown endogenous variable '" + target + "'");
    }
    Scm sub = submodel(intervention);
    return sub.evaluate_unit(u).at(target);
}

namespace {

void check_enumerable(const Scm& scm) {
    if (scm.unit_count() > Scm::kEnumerationCap) {
        throw std::runtime_error(
            "exact enumeration cap exceeded: the joint exogenous domain has more than 2^24 "
            "configurations");
    }
}

}  // namespace

Distribution Scm::joint_observational() const {
    return interventional({});
}

Distribution Scm::interventional(const Assignment& intervention) const {
    check_enumerable(*this);
    auto fixed = resolve_endo(intervention);
    std::vector<int> do_values(endo_.size(), -1);
    for (const auto& [vi, di] : fixed) {
        do_values[vi] = di;
    }
    Distribution dist;
    dist.variables = endo_;
    std::size_t cells = 1;
    for (const auto& v : endo_) {
        cells *= v.domain.size();
    }
    dist.probs.assign(cells, 0.0);
    std::vector<std::size_t> stride(endo_.size(), 1);
    for (std::size_t i = endo_.size(); i-- > 1;) {
        stride[i - 1] = stride[i] * endo_[i].domain.size();
    }
    std::vector<int> u, v;
    for (std::uint64_t flat = 0; flat < unit_count_; ++flat) {
        decode_unit(flat, u);
        double w = unit_weight(u);
        if (w == 0) {
            continue;
        }
        evaluate_indexed(u, do_values, v);
        std::size_t cell = 0;
        for (std::size_t i = 0; i < endo_.size(); ++i) {
            cell += static_cast<std::size_t>(v[i]) * stride[i];
        }
        dist.probs[cell] += w;
    }
    return dist;
}

// --- JSON loading ------------------------------------------------------------------

namespace {

Variable parse_variable(const std::string& name, const ordered_json& domain_json,
                        const ordered_json* numeric_map) {
    if (!domain_json.is_array() || domain_json.empty()) {
        throw std::invalid_argument("variable '" + name + "': domain must be a nonempty array");
    }
    Variable v;
    v.name = name;
    for (const auto& entry : domain_json) {
        auto [label, numeric] = domain_entry(entry, name);
        v.domain.push_back(label);
        v.numeric.push_back(numeric);
    }
    if (numeric_map != nullptr && numeric_map->contains(name)) {
        const auto& m = (*numeric_map)[name];
        if (!m.is_object()) {
            throw std::invalid_argument("numeric encoding for '" + name + "' must be an object");
        }
        for (std::size_t i = 0; i < v.domain.size(); ++i) {
            if (m.contains(v.domain[i])) {
                v.numeric[i] = m[v.domain[i]].get<double>();
            }
        }
    }
    v.has_numeric = std::all_of(v.numeric.begin(), v.numeric.end(),
                                [](double d) { return std::isfinite(d); });
    return v;
}

std::pair<Variable, ExogenousDistribution> parse_exogenous(const std::string& name,
                                                           const ordered_json& spec) {
    Variable v;
    v.name = name;
    ExogenousDistribution d;
    d.variable = name;
    if (!spec.is_object()) {
        throw std::invalid_argument("exogenous '" + name + "': specification must be an object");
    }
    if (spec.contains("bernoulli")) {
        double p = spec["bernoulli"].get<double>();
        if (p < 0 || p > 1 || !std::isfinite(p)) {
            throw std::invalid_argument("exogenous '" + name + "': bernoulli parameter out of range");
        }
        v.domain = {"0", "1"};
        v.numeric = {0.0, 1.0};
        d.probabilities = {1.0 - p, p};
    } else if (spec.contains("multinomial")) {
        const auto& w = spec["multinomial"];
        if (!w.is_array() || w.empty()) {
            throw std::invalid_argument("exogenous '" + name +
                                        "': multinomial weights must be a nonempty array");
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            v.domain.push_back(std::to_string(i));
            v.numeric.push_back(static_cast<double>(i));
            d.probabilities.push_back(w[i].get<double>());
        }
    } else if (spec.contains("table")) {
        const auto& t = spec["table"];
        if (!t.is_object() || t.empty()) {
            throw std::invalid_argument("exogenous '" + name +
                                        "': table must be a nonempty object");
        }
        for (const auto& [key, val] : t.items()) {
            v.domain.push_back(key);
            char* end = nullptr;
            double num = std::strtod(key.c_str(), &end);
            v.numeric.push_back((end != nullptr && *end == '\0') ? num : kNaN);
            d.probabilities.push_back(val.get<double>());
        }
    } else {
        throw std::invalid_argument("exogenous '" + name +
                                    "': expected one of bernoulli/multinomial/table");
    }
    v.has_numeric = std::all_of(v.numeric.begin(), v.numeric.end(),
                                [](double x) { return std::isfinite(x); });
    return {std::move(v), std::move(d)};
}

}  // namespace

Scm parse_model(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("model JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("endogenous") || !j.contains("exogenous") ||
        !j.contains("mechanisms")) {
        throw std::invalid_argument(
            "model JSON must contain 'endogenous', 'exogenous' and 'mechanisms'");
    }
    const ordered_json* numeric_map = j.contains("numeric") ? &j["numeric"] : nullptr;

    std::vector<Variable> endo;
    for (const auto& [name, domain] : j["endogenous"].items()) {
        endo.push_back(parse_variable(name, domain, numeric_map));
    }
    std::vector<Variable> exo;
    std::vector<ExogenousDistribution> dists;
    for (const auto& [name, spec] : j["exogenous"].items()) {
        auto [v, d] = parse_exogenous(name, spec);
        exo.push_back(std::move(v));
        dists.push_back(std::move(d));
    }

    auto find_var = [&](const std::string& name) -> const Variable* {
        for (const auto& v : endo) {
            if (v.name == name) {
                return &v;
            }
        }
        for (const auto& v : exo) {
            if (v.name == name) {
                return &v;
            }
        }
        return nullptr;
    };

    std::vector<Mechanism> mechs;
    for (const auto& [target, spec] : j["mechanisms"].items()) {
        Mechanism m;
        m.target = target;
        if (spec.contains("parents")) {
            for (const auto& p : spec["parents"]) {
                m.parents.push_back(p.get<std::string>());
            }
        }
        if (spec.contains("exo_parents")) {
            for (const auto& p : spec["exo_parents"]) {
                m.exo_parents.push_back(p.get<std::string>());
            }
        }
        const Variable* target_var = nullptr;
        for (const auto& v : endo) {
            if (v.name == target) {
                target_var = &v;
            }
        }
        if (target_var == nullptr) {
            throw std::invalid_argument("mechanism target '" + target +
                                        "' is not an endogenous variable");
        }
        std::vector<const Variable*> parent_vars;
        for (const auto& p : m.parents) {
            const Variable* pv = find_var(p);
            if (pv == nullptr) {
                throw std::invalid_argument("mechanism for '" + target + "': unknown parent '" +
                                            p + "'");
            }
            parent_vars.push_back(pv);
        }
        for (const auto& p : m.exo_parents) {
            const Variable* pv = find_var(p);
            if (pv == nullptr) {
                throw std::invalid_argument("mechanism for '" + target + "': unknown parent '" +
                                            p + "'");
            }
            parent_vars.push_back(pv);
        }
        std::size_t cells = 1;
        for (const auto* pv : parent_vars) {
            cells *= pv->domain.size();
        }

        if (spec.contains("table")) {
            m.table.assign(cells, -1);
            const auto& t = spec["table"];
            if (!t.is_object()) {
                throw std::invalid_argument("mechanism for '" + target +
                                            "': table must be an object");
            }
            std::size_t seen = 0;
            for (const auto& [key, val] : t.items()) {
                auto parts = split_key(key);
                if (parts.size() != parent_vars.size()) {
                    throw std::invalid_argument("mechanism for '" + target + "': table key \"" +
                                                key + "\" does not match the parent count");
                }
                std::size_t index = 0;
                for (std::size_t s = 0; s < parts.size(); ++s) {
                    int di = parent_vars[s]->index_of(parts[s]);
                    if (di < 0) {
                        throw std::invalid_argument("mechanism for '" + target +
                                                    "': table key \"" + key + "\" has value '" +
                                                    parts[s] + "' outside the domain of '" +
                                                    parent_vars[s]->name + "'");
                    }
                    index = index * parent_vars[s]->domain.size() + static_cast<std::size_t>(di);
                }
                std::string out_label = value_to_label(val, "mechanism for '" + target + "'");
                int out = target_var->index_of(out_label);
                if (out < 0) {
                    throw std::invalid_argument("mechanism for '" + target + "': output '" +
                                                out_label + "' outside the target domain");
                }
                if (m.table[index] != -1) {
                    throw std::invalid_argument("mechanism for '" + target +
                                                "': duplicate table key \"" + key + "\"");
                }
                m.table[index] = out;
                ++seen;
            }
            if (seen != cells) {
                for (std::size_t i = 0; i < m.table.size(); ++i) {
                    if (m.table[i] == -1) {
                        throw std::invalid_argument(
                            "mechanism for '" + target +
                            "': table is not total (missing parent assignments)");
                    }
                }
            }
        } else if (spec.contains("expr")) {
            const std::string expr = spec["expr"].get<std::string>();
            // Compile by enumerating the joint parent domain; every parent must
            // have an integer numeric encoding.
            for (const auto* pv : parent_vars) {
                for (std::size_t k = 0; k < pv->domain.size(); ++k) {
                    double num = pv->numeric[k];
                    if (!std::isfinite(num) || num != std::floor(num)) {
                        throw std::invalid_argument("mechanism for '" + target + "': parent '" +
                                                    pv->name +
                                                    "' needs an integer numeric encoding for "
                                                    "expression mechanisms");
                    }
                }
            }
            m.table.assign(cells, -1);
            std::vector<std::size_t> idx(parent_vars.size(), 0);
            for (std::size_t flat = 0; flat < cells; ++flat) {
                std::size_t rem = flat;
                for (std::size_t s = parent_vars.size(); s-- > 0;) {
                    idx[s] = rem % parent_vars[s]->domain.size();
                    rem /= parent_vars[s]->domain.size();
                }
                std::map<std::string, std::int64_t> env;
                for (std::size_t s = 0; s < parent_vars.size(); ++s) {
                    env[parent_vars[s]->name] =
                        static_cast<std::int64_t>(parent_vars[s]->numeric[idx[s]]);
                }
                std::int64_t result = evaluate_expression(expr, env);
                int out = -1;
                for (std::size_t k = 0; k < target_var->domain.size(); ++k) {
                    double num = target_var->numeric[k];
                    if (std::isfinite(num) && static_cast<std::int64_t>(num) == result &&
                        num == std::floor(num)) {
                        out = static_cast<int>(k);
                        break;
                    }
                }
                if (out < 0) {
                    std::ostringstream ctx;
                    ctx << "mechanism for '" << target << "': expression produced " << result
                        << ", which is outside the target domain (at parent assignment";
                    for (std::size_t s = 0; s < parent_vars.size(); ++s) {
                        ctx << ' ' << parent_vars[s]->name << '='
                            << parent_vars[s]->domain[idx[s]];
                    }
                    ctx << ')';
                    throw std::invalid_argument(ctx.str());
                }
                m.table[flat] = out;
            }
        } else {
            throw std::invalid_argument("mechanism for '" + target +
                                        "': expected 'table' or 'expr'");
        }
        mechs.push_back(std::move(m));
    }

    return Scm(std::move(endo), std::move(exo), std::move(mechs), std::move(dists));
}

Scm load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    Scm scm = parse_model(buf.str());
    for (const auto& w : scm.warnings()) {
        std::fprintf(stderr, "warning: %s: %s\n", path.c_str(), w.c_str());
    }
    return scm;
}

}  // namespace spurdec
