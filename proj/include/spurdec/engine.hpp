#pragma once

// Exact inference procedures on discrete SCMs: abduction, conditional and
// counterfactual queries, the partially-abducted posterior family (where only
// part of the exogenous variables is updated by the evidence), and the
// experimental spurious-effect primitives built on top of them.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spurdec/model.hpp"

namespace spurdec {

// Posterior over joint exogenous configurations, sparse over flat unit indices.
struct Posterior {
    std::vector<std::pair<std::uint64_t, double>> weights;  // normalized

    double total() const;
};

// Factored posterior P(u1) * P(u2 | u1, e): the u1 block keeps its prior while
// the complementary block is updated by the evidence within each u1 slice.
struct PaPosterior {
    std::vector<std::string> u1_vars;  // sorted
    Assignment evidence;
    struct Slice {
        Assignment u1;          // fixed values of the u1 block
        double prior;           // P(u1)
        // Conditional weights over full units within the slice, normalized to 1.
        std::vector<std::pair<std::uint64_t, double>> conditional;
    };
    std::vector<Slice> slices;  // slices with prior > 0 only
};

// --- core procedures ----------------------------------------------------------

// Update P(u) by the evidence. Throws on zero-probability evidence.
Posterior abduct(const Scm& scm, const Assignment& evidence);

// P(event | evidence) by exact enumeration. Throws on impossible evidence.
double conditional_prob(const Scm& scm, const Assignment& event, const Assignment& evidence);
double conditional_expectation(const Scm& scm, const std::string& var, const Assignment& evidence);

// Abduction-action-prediction: probability of `event` in the submodel under
// `intervention`, with units weighted by the posterior given `evidence`.
double counterfactual_prob(const Scm& scm, const Assignment& event,
                           const Assignment& intervention, const Assignment& evidence);

// Partially abducted posterior for the u1 block. Preconditions: each u1 slice
// with positive prior must keep the evidence possible; zero-prior slices are
// skipped. Throws "evidence impossible under fixed u1" naming the slice.
PaPosterior pa_posterior(const Scm& scm, const Assignment& evidence, const NameSet& u1_vars);

// P(event | evidence^{u1_vars}) = sum_{u1} P(u1) P(event | evidence, u1).
double pa_conditional(const Scm& scm, const Assignment& event, const Assignment& evidence,
                      const NameSet& u1_vars);
double pa_expectation(const Scm& scm, const std::string& var, const Assignment& evidence,
                      const NameSet& u1_vars);

// Evaluate an event probability from an already-computed factored posterior
// (used to assert its defining identity against the direct sum).
double pa_prob_from_posterior(const Scm& scm, const PaPosterior& post, const Assignment& event);

// --- spurious-effect primitives -----------------------------------------------

// P(y | x) - P(y | do(x)), and the expectation-form variant.
double exp_se(const Scm& scm, const Assignment& x, const Assignment& y);
double exp_se_expectation(const Scm& scm, const Assignment& x, const std::string& y_var);

// Set-specific version P(y | x^A) - P(y | x^B); requires A to be a subset of B.
double exp_se_set(const Scm& scm, const Assignment& x, const Assignment& y,
                  const NameSet& a, const NameSet& b);
double exp_se_set_expectation(const Scm& scm, const Assignment& x, const std::string& y_var,
                              const NameSet& a, const NameSet& b);

}  // namespace spurdec
