#include "spurdec/decompose.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "spurdec/diagram.hpp"

namespace spurdec {

namespace {

Assignment event_of(const OutcomeQuery& y) {
    return Assignment{{y.variable, *y.value}};
}

double observed_value(const Scm& scm, const Assignment& x, const OutcomeQuery& y) {
    if (y.value) {
        return conditional_prob(scm, event_of(y), x);
    }
    return conditional_expectation(scm, y.variable, x);
}

double interventional_value(const Scm& scm, const Assignment& x, const OutcomeQuery& y) {
    Distribution dist = scm.interventional(x);
    if (y.value) {
        return dist.prob(event_of(y));
    }
    return dist.expectation(y.variable);
}

double prefix_value(const Scm& scm, const Assignment& x, const OutcomeQuery& y,
                    const NameSet& u1) {
    if (y.value) {
        return pa_conditional(scm, event_of(y), x, u1);
    }
    return pa_expectation(scm, y.variable, x, u1);
}

void check_outcome(const Scm& scm, const Assignment& x, const OutcomeQuery& y) {
    if (scm.endo_index(y.variable) < 0) {
        throw std::invalid_argument("outcome '" + y.variable +
                                    "' is not an endogenous variable");
    }
    if (x.count(y.variable)) {
        throw std::invalid_argument("outcome '" + y.variable +
                                    "' cannot be part of the treatment assignment");
    }
}

const std::string& single_treatment(const Assignment& x) {
    if (x.size() != 1) {
        throw std::invalid_argument(
            "per-latent decompositions require a single treatment variable; got " +
            std::to_string(x.size()));
    }
    return x.begin()->first;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) {
            out += ",";
        }
        out += n;
    }
    return out;
}

void finish_report(DecompositionReport& rep) {
    double sum = 0;
    for (const auto& c : rep.contributions) {
        sum += c.value;
    }
    rep.total = rep.baseline - rep.endpoint;
    rep.residual = rep.total - sum;
}

}  // namespace

TvReport tv_decompose(const Scm& scm, const Assignment& x0, const Assignment& x1,
                      const OutcomeQuery& y) {
    check_outcome(scm, x0, y);
    check_outcome(scm, x1, y);
    TvReport r;
    double obs1 = observed_value(scm, x1, y);
    double obs0 = observed_value(scm, x0, y);
    double do1 = interventional_value(scm, x1, y);
    double do0 = interventional_value(scm, x0, y);
    r.tv = obs1 - obs0;
    r.te = do1 - do0;
    r.exp_se_x1 = obs1 - do1;
    r.exp_se_x0 = obs0 - do0;
    return r;
}

DecompositionReport markov_decompose(const Scm& scm, const Assignment& x, const OutcomeQuery& y,
                                     const std::optional<std::vector<std::string>>& confounder_order,
                                     bool force_model_only) {
    check_outcome(scm, x, y);
    const std::string& treat = single_treatment(x);
    CausalDiagram d = project(scm);
    if (!is_markovian(d)) {
        throw std::invalid_argument(
            "model has shared exogenous parents (bidirected edges), so the per-confounder "
            "decomposition does not apply; use semimarkov_decompose");
    }

    std::vector<std::string> def_order = confounders_in_topological_order(d, treat, y.variable);

    // Exogenous parents per confounder (exclusive in a model without shared
    // exogenous parents).
    std::map<std::string, std::vector<std::string>> latents_of;
    for (const auto& z : def_order) {
        std::vector<std::string> ls;
        for (const auto& p : d.parents(z)) {
            if (d.is_exogenous(p)) {
                ls.push_back(p);
            }
        }
        std::sort(ls.begin(), ls.end());
        latents_of[z] = std::move(ls);
    }

    std::vector<std::string> order = def_order;
    if (confounder_order) {
        // Accept the order either as confounder names or as their latent
        // parents (reports print the latter).
        std::vector<std::string> as_confounders = *confounder_order;
        std::map<std::string, std::string> latent_to_z;
        for (const auto& [z, ls] : latents_of) {
            for (const auto& u : ls) {
                latent_to_z[u] = z;
            }
        }
        bool all_latents = !confounder_order->empty();
        for (const auto& n : *confounder_order) {
            if (!latent_to_z.count(n)) {
                all_latents = false;
                break;
            }
        }
        if (all_latents) {
            std::vector<std::string> translated;
            for (const auto& n : *confounder_order) {
                const auto& z = latent_to_z[n];
                if (std::find(translated.begin(), translated.end(), z) == translated.end()) {
                    translated.push_back(z);
                }
            }
            as_confounders = std::move(translated);
        }
        if (force_model_only) {
            std::set<std::string> expect(def_order.begin(), def_order.end());
            std::set<std::string> got(as_confounders.begin(), as_confounders.end());
            if (expect != got || as_confounders.size() != def_order.size()) {
                throw std::invalid_argument(
                    "user-supplied confounder order must be a permutation of the confounder "
                    "set");
            }
            order = std::move(as_confounders);
        } else {
            order = confounders_in_topological_order(d, treat, y.variable, as_confounders);
        }
    }

    DecompositionReport rep;
    rep.mode = "markovian";
    rep.baseline = observed_value(scm, x, y);
    rep.endpoint = interventional_value(scm, x, y);

    NameSet u1;
    double prev = rep.baseline;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& ls = latents_of[order[i]];
        u1.insert(ls.begin(), ls.end());
        for (const auto& u : ls) {
            rep.ordering.push_back(u);
        }
        // The final prefix covers every latent on a spurious trek, where the
        // partially-abducted value coincides with the interventional one.
        double cur = (i + 1 == order.size()) ? rep.endpoint : prefix_value(scm, x, y, u1);
        rep.contributions.push_back(Contribution{join_names(ls), prev - cur});
        prev = cur;
    }
    finish_report(rep);
    return rep;
}

DecompositionReport semimarkov_decompose(const Scm& scm, const Assignment& x,
                                         const OutcomeQuery& y,
                                         const std::optional<std::vector<std::string>>& u_order) {
    check_outcome(scm, x, y);
    const std::string& treat = single_treatment(x);
    CausalDiagram d = project(scm);

    std::vector<std::string> tops = tops_of_spurious_treks(d, treat, y.variable);
    std::vector<std::string> order = tops;  // lexicographic by construction
    if (u_order) {
        std::set<std::string> expect(tops.begin(), tops.end());
        std::set<std::string> got(u_order->begin(), u_order->end());
        if (expect != got || u_order->size() != tops.size()) {
            throw std::invalid_argument(
                "latent order must be a permutation of the tops of spurious treks {" +
                join_names(tops) + "}");
        }
        order = *u_order;
    }

    DecompositionReport rep;
    rep.mode = "semi-markovian";
    rep.ordering = order;
    rep.baseline = observed_value(scm, x, y);
    rep.endpoint = interventional_value(scm, x, y);

    NameSet u1;
    double prev = rep.baseline;
    for (std::size_t i = 0; i < order.size(); ++i) {
        u1.insert(order[i]);
        // Same endpoint identity as above: once all trek tops are fixed, the
        // partially-abducted value equals the interventional one (and the
        // direct sum may even be undefined when some full slice contradicts
        // the evidence), so the last step is computed interventionally.
        double cur = (i + 1 == order.size()) ? rep.endpoint : prefix_value(scm, x, y, u1);
        rep.contributions.push_back(Contribution{order[i], prev - cur});
        prev = cur;
    }
    finish_report(rep);
    return rep;
}

}  // namespace spurdec
