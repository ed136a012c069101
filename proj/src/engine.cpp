#include "spurdec/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace spurdec {

namespace {

void check_enumerable(const Scm& scm) {
    if (scm.unit_count() > Scm::kEnumerationCap) {
        throw std::runtime_error(
            "exact enumeration cap exceeded: the joint exogenous domain has more than 2^24 "
            "configurations");
    }
}

// Resolved outcome functional over an endogenous value vector: either an event
// indicator or the numeric encoding of one variable.
struct Outcome {
    // fixed event coordinates (endo index, value index); empty means numeric mode
    std::vector<std::pair<int, int>> event;
    int numeric_var = -1;

    double operator()(const Scm& scm, const std::vector<int>& v) const {
        if (numeric_var >= 0) {
            return scm.numeric_value(numeric_var, v[numeric_var]);
        }
        for (const auto& [vi, di] : event) {
            if (v[vi] != di) {
                return 0.0;
            }
        }
        return 1.0;
    }
};

Outcome event_outcome(const Scm& scm, const Assignment& event) {
    Outcome o;
    o.event = scm.resolve_endo(event);
    return o;
}

Outcome numeric_outcome(const Scm& scm, const std::string& var) {
    int vi = scm.endo_index(var);
    if (vi < 0) {
        throw std::invalid_argument("unknown endogenous variable '" + var + "'");
    }
    // Surface a missing numeric encoding immediately.
    scm.numeric_value(vi, 0);
    Outcome o;
    o.numeric_var = vi;
    return o;
}

bool matches(const std::vector<int>& v, const std::vector<std::pair<int, int>>& fixed) {
    for (const auto& [vi, di] : fixed) {
        if (v[vi] != di) {
            return false;
        }
    }
    return true;
}

// E[f(V) | evidence] by exact enumeration (f = indicator gives probabilities).
double conditional_value(const Scm& scm, const Outcome& f, const Assignment& evidence) {
    check_enumerable(scm);
    auto fixed = scm.resolve_endo(evidence);
    std::vector<int> u, v;
    double num = 0, den = 0;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, {}, v);
        if (!matches(v, fixed)) {
            continue;
        }
        den += w;
        num += w * f(scm, v);
    }
    if (den <= 0) {
        throw std::runtime_error("impossible evidence: the conditioning event has probability 0");
    }
    return num / den;
}

double interventional_value(const Scm& scm, const Outcome& f, const Assignment& intervention) {
    check_enumerable(scm);
    auto fixed = scm.resolve_endo(intervention);
    std::vector<int> do_values(scm.endogenous().size(), -1);
    for (const auto& [vi, di] : fixed) {
        do_values[vi] = di;
    }
    std::vector<int> u, v;
    double num = 0;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, do_values, v);
        num += w * f(scm, v);
    }
    return num;
}

std::string describe_slice(const Assignment& slice) {
    std::ostringstream out;
    out << '{';
    bool first = true;
    for (const auto& [k, v] : slice) {
        if (!first) {
            out << ", ";
        }
        first = false;
        out << k << '=' << v;
    }
    out << '}';
    return out.str();
}

// Shared machinery for the partially-abducted family: buckets every unit by
// its u1-block assignment and accumulates evidence-consistent mass per slice.
struct SliceIndexer {
    std::vector<int> u1_indices;        // exogenous indices of the u1 block, sorted by name
    std::vector<std::string> u1_names;
    std::vector<std::uint64_t> strides; // mixed-radix strides over the u1 block
    std::uint64_t slice_count = 1;

    SliceIndexer(const Scm& scm, const NameSet& u1_vars) {
        for (const auto& name : u1_vars) {
            int idx = scm.exo_index(name);
            if (idx < 0) {
                throw std::invalid_argument("unknown exogenous variable '" + name + "'");
            }
            u1_indices.push_back(idx);
            u1_names.push_back(name);
        }
        strides.assign(u1_indices.size(), 1);
        for (std::size_t i = u1_indices.size(); i-- > 1;) {
            strides[i - 1] =
                strides[i] * scm.exo_var(u1_indices[i]).domain.size();
        }
        for (int idx : u1_indices) {
            slice_count *= scm.exo_var(idx).domain.size();
        }
    }

    std::uint64_t key(const std::vector<int>& u) const {
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < u1_indices.size(); ++i) {
            k += static_cast<std::uint64_t>(u[u1_indices[i]]) * strides[i];
        }
        return k;
    }

    double prior(const Scm& scm, std::uint64_t key) const {
        double p = 1;
        for (std::size_t i = u1_indices.size(); i-- > 0;) {
            std::uint64_t size = scm.exo_var(u1_indices[i]).domain.size();
            p *= scm.exogenous_dists()[u1_indices[i]].probabilities[key % size];
            key /= size;
        }
        return p;
    }

    Assignment slice_assignment(const Scm& scm, std::uint64_t key) const {
        Assignment a;
        for (std::size_t i = u1_indices.size(); i-- > 0;) {
            std::uint64_t size = scm.exo_var(u1_indices[i]).domain.size();
            a[u1_names[i]] = scm.exo_var(u1_indices[i]).domain[key % size];
            key /= size;
        }
        return a;
    }
};

// sum_{u1} P(u1) E[f | evidence, u1], skipping zero-prior slices and rejecting
// slices whose positive prior makes the evidence impossible.
double pa_value(const Scm& scm, const Outcome& f, const Assignment& evidence,
                const NameSet& u1_vars) {
    check_enumerable(scm);
    SliceIndexer slicer(scm, u1_vars);
    auto fixed = scm.resolve_endo(evidence);
    std::vector<double> num(slicer.slice_count, 0.0), den(slicer.slice_count, 0.0);
    std::vector<int> u, v;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, {}, v);
        if (!matches(v, fixed)) {
            continue;
        }
        std::uint64_t k = slicer.key(u);
        den[k] += w;
        num[k] += w * f(scm, v);
    }
    double total = 0;
    for (std::uint64_t k = 0; k < slicer.slice_count; ++k) {
        double prior = slicer.prior(scm, k);
        if (prior == 0) {
            continue;  // zero-probability slice contributes nothing
        }
        if (den[k] <= 0) {
            throw std::runtime_error("evidence impossible under fixed u1: slice " +
                                     describe_slice(slicer.slice_assignment(scm, k)) +
                                     " has positive probability but makes the evidence "
                                     "impossible");
        }
        // den[k] = P(u1) P(e | u1); dividing restores the slice conditional.
        total += prior * (num[k] / den[k]);
    }
    return total;
}

}  // namespace

double Posterior::total() const {
    double t = 0;
    for (const auto& [unit, w] : weights) {
        (void)unit;
        t += w;
    }
    return t;
}

Posterior abduct(const Scm& scm, const Assignment& evidence) {
    check_enumerable(scm);
    auto fixed = scm.resolve_endo(evidence);
    Posterior post;
    double den = 0;
    std::vector<int> u, v;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, {}, v);
        if (!matches(v, fixed)) {
            continue;
        }
        post.weights.emplace_back(flat, w);
        den += w;
    }
    if (den <= 0) {
        throw std::runtime_error("impossible evidence: the conditioning event has probability 0");
    }
    for (auto& [unit, w] : post.weights) {
        (void)unit;
        w /= den;
    }
    return post;
}

double conditional_prob(const Scm& scm, const Assignment& event, const Assignment& evidence) {
    return conditional_value(scm, event_outcome(scm, event), evidence);
}

double conditional_expectation(const Scm& scm, const std::string& var,
                               const Assignment& evidence) {
    return conditional_value(scm, numeric_outcome(scm, var), evidence);
}

double counterfactual_prob(const Scm& scm, const Assignment& event,
                           const Assignment& intervention, const Assignment& evidence) {
    check_enumerable(scm);
    auto event_fixed = scm.resolve_endo(event);
    auto evid_fixed = scm.resolve_endo(evidence);
    auto do_fixed = scm.resolve_endo(intervention);
    std::vector<int> do_values(scm.endogenous().size(), -1);
    for (const auto& [vi, di] : do_fixed) {
        do_values[vi] = di;
    }
    std::vector<int> u, natural, hypothetical;
    double num = 0, den = 0;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, {}, natural);
        if (!matches(natural, evid_fixed)) {
            continue;
        }
        den += w;
        scm.evaluate_indexed(u, do_values, hypothetical);
        if (matches(hypothetical, event_fixed)) {
            num += w;
        }
    }
    if (den <= 0) {
        throw std::runtime_error("impossible evidence: the conditioning event has probability 0");
    }
    return num / den;
}

PaPosterior pa_posterior(const Scm& scm, const Assignment& evidence, const NameSet& u1_vars) {
    check_enumerable(scm);
    SliceIndexer slicer(scm, u1_vars);
    auto fixed = scm.resolve_endo(evidence);
    std::vector<std::vector<std::pair<std::uint64_t, double>>> raw(slicer.slice_count);
    std::vector<double> den(slicer.slice_count, 0.0);
    std::vector<int> u, v;
    for (std::uint64_t flat = 0; flat < scm.unit_count(); ++flat) {
        scm.decode_unit(flat, u);
        double w = scm.unit_weight(u);
        if (w == 0) {
            continue;
        }
        scm.evaluate_indexed(u, {}, v);
        if (!matches(v, fixed)) {
            continue;
        }
        std::uint64_t k = slicer.key(u);
        raw[k].emplace_back(flat, w);
        den[k] += w;
    }
    PaPosterior post;
    post.u1_vars = slicer.u1_names;
    post.evidence = evidence;
    for (std::uint64_t k = 0; k < slicer.slice_count; ++k) {
        double prior = slicer.prior(scm, k);
        if (prior == 0) {
            continue;
        }
        if (den[k] <= 0) {
            throw std::runtime_error("evidence impossible under fixed u1: slice " +
                                     describe_slice(slicer.slice_assignment(scm, k)) +
                                     " has positive probability but makes the evidence "
                                     "impossible");
        }
        PaPosterior::Slice slice;
        slice.u1 = slicer.slice_assignment(scm, k);
        slice.prior = prior;
        slice.conditional = std::move(raw[k]);
        for (auto& [unit, w] : slice.conditional) {
            (void)unit;
            w /= den[k];
        }
        post.slices.push_back(std::move(slice));
    }
    return post;
}

double pa_conditional(const Scm& scm, const Assignment& event, const Assignment& evidence,
                      const NameSet& u1_vars) {
    return pa_value(scm, event_outcome(scm, event), evidence, u1_vars);
}

double pa_expectation(const Scm& scm, const std::string& var, const Assignment& evidence,
                      const NameSet& u1_vars) {
    return pa_value(scm, numeric_outcome(scm, var), evidence, u1_vars);
}

double pa_prob_from_posterior(const Scm& scm, const PaPosterior& post, const Assignment& event) {
    auto fixed = scm.resolve_endo(event);
    std::vector<int> u, v;
    double total = 0;
    for (const auto& slice : post.slices) {
        double inner = 0;
        for (const auto& [flat, w] : slice.conditional) {
            scm.decode_unit(flat, u);
            scm.evaluate_indexed(u, {}, v);
            if (matches(v, fixed)) {
                inner += w;
            }
        }
        total += slice.prior * inner;
    }
    return total;
}

double exp_se(const Scm& scm, const Assignment& x, const Assignment& y) {
    Outcome f = event_outcome(scm, y);
    return conditional_value(scm, f, x) - interventional_value(scm, f, x);
}

double exp_se_expectation(const Scm& scm, const Assignment& x, const std::string& y_var) {
    Outcome f = numeric_outcome(scm, y_var);
    return conditional_value(scm, f, x) - interventional_value(scm, f, x);
}

namespace {

void check_nested(const NameSet& a, const NameSet& b) {
    if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) {
        throw std::invalid_argument(
            "set-specific spurious effect requires nested sets (A must be a subset of B)");
    }
}

}  // namespace

double exp_se_set(const Scm& scm, const Assignment& x, const Assignment& y, const NameSet& a,
                  const NameSet& b) {
    check_nested(a, b);
    Outcome f = event_outcome(scm, y);
    return pa_value(scm, f, x, a) - pa_value(scm, f, x, b);
}

double exp_se_set_expectation(const Scm& scm, const Assignment& x, const std::string& y_var,
                              const NameSet& a, const NameSet& b) {
    check_nested(a, b);
    Outcome f = numeric_outcome(scm, y_var);
    return pa_value(scm, f, x, a) - pa_value(scm, f, x, b);
}

}  // namespace spurdec
