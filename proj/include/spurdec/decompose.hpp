#pragma once

// Exact decompositions on SCMs: the total-variation split and the telescoping
// per-latent decompositions of the experimental spurious effect, for models
// with and without shared exogenous parents.

#include <optional>
#include <string>
#include <vector>

#include "spurdec/engine.hpp"
#include "spurdec/model.hpp"

namespace spurdec {

// Outcome query: probability of a specific value, or expectation over the
// variable's numeric encoding when `value` is absent.
struct OutcomeQuery {
    std::string variable;
    std::optional<std::string> value;

    static OutcomeQuery event(std::string var, std::string val) {
        return OutcomeQuery{std::move(var), std::move(val)};
    }
    static OutcomeQuery expectation(std::string var) {
        return OutcomeQuery{std::move(var), std::nullopt};
    }
};

struct TvReport {
    double tv = 0;         // Q(y|x1) - Q(y|x0)
    double te = 0;         // Q(y|do(x1)) - Q(y|do(x0))
    double exp_se_x1 = 0;  // Q(y|x1) - Q(y|do(x1))
    double exp_se_x0 = 0;  // Q(y|x0) - Q(y|do(x0))

    double residual() const { return tv - (te + exp_se_x1 - exp_se_x0); }
};

struct Contribution {
    std::string label;  // latent variable added at this step
    double value = 0;
};

struct DecompositionReport {
    double total = 0;                         // full spurious effect Q(y|x) - Q(y|do(x))
    std::vector<Contribution> contributions;  // telescoping steps, in order
    std::vector<std::string> ordering;        // latent ordering used
    std::string mode;                         // "markovian" | "semi-markovian"
    double residual = 0;                      // total - sum(contributions)
    double baseline = 0;                      // Q(y|x)
    double endpoint = 0;                      // Q(y|do(x))
};

// TV(x0,x1) = TE(x0,x1) + Exp-SE(x1) - Exp-SE(x0).
TvReport tv_decompose(const Scm& scm, const Assignment& x0, const Assignment& x1,
                      const OutcomeQuery& y);

// Per-confounder decomposition for models whose diagram has no bidirected
// edges. Contributions follow the topological confounder order (or the given
// confounder order, which must be topologically valid unless
// `force_model_only` is set — non-topological orders yield well-defined model
// quantities that are not identifiable from data, hence the explicit opt-in).
DecompositionReport markov_decompose(const Scm& scm, const Assignment& x, const OutcomeQuery& y,
                                     const std::optional<std::vector<std::string>>& confounder_order =
                                         std::nullopt,
                                     bool force_model_only = false);

// Per-latent decomposition over the tops of spurious treks, in the given
// order (default: lexicographic). Works for any discrete SCM.
DecompositionReport semimarkov_decompose(const Scm& scm, const Assignment& x, const OutcomeQuery& y,
                                         const std::optional<std::vector<std::string>>& u_order =
                                             std::nullopt);

}  // namespace spurdec
