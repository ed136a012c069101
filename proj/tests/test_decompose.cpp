// Decomposition layer: the total-variation split and the telescoping
// per-latent decompositions, exact on the bundled models and by property on
// random models.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "spurdec/decompose.hpp"
#include "spurdec/engine.hpp"
#include "spurdec/model.hpp"
#include "spurdec/rng.hpp"
#include "test_support.hpp"

using namespace spurdec;
using testsupport::model_path;
using testsupport::near;

namespace {
const Assignment kX1{{"X", "1"}};
const Assignment kX0{{"X", "0"}};

double sum_contributions(const DecompositionReport& rep) {
    double s = 0;
    for (const auto& c : rep.contributions) {
        s += c.value;
    }
    return s;
}
}  // namespace

TEST_CASE("total variation splits into total and spurious parts") {
    Scm scm = load_model(model_path("markov_b1.json"));
    TvReport tv = tv_decompose(scm, kX0, kX1, OutcomeQuery::expectation("Y"));

    CHECK(near(tv.tv, 56.0 / 25.0 - 19.0 / 25.0));
    CHECK(near(tv.te, 1.0));
    CHECK(near(tv.exp_se_x1, 0.24));
    CHECK(near(tv.exp_se_x0, -0.24));
    CHECK(std::fabs(tv.residual()) < 1e-12);

    TvReport ev = tv_decompose(scm, kX0, kX1, OutcomeQuery::event("Y", "3"));
    CHECK(std::fabs(ev.residual()) < 1e-12);
}

TEST_CASE("per-confounder decomposition on the chain model") {
    Scm scm = load_model(model_path("markov_b1.json"));
    DecompositionReport rep = markov_decompose(scm, kX1, OutcomeQuery::expectation("Y"));

    CHECK(rep.mode == "markovian");
    CHECK(rep.ordering == std::vector<std::string>{"U1", "U2"});
    CHECK(near(rep.baseline, 56.0 / 25.0));
    CHECK(near(rep.endpoint, 2.0));
    CHECK(near(rep.total, 0.24));
    REQUIRE(rep.contributions.size() == 2);
    CHECK(rep.contributions[0].label == "U1");
    CHECK(rep.contributions[1].label == "U2");
    CHECK(near(rep.contributions[0].value, 2034.0 / 14725.0));
    CHECK(near(rep.contributions[1].value, 60.0 / 589.0));
    CHECK(std::fabs(rep.residual) < 1e-12);
}

TEST_CASE("explicit confounder orders: validation and the model-only escape hatch") {
    Scm scm = load_model(model_path("markov_b1.json"));
    OutcomeQuery y = OutcomeQuery::expectation("Y");

    // The reversed order is not topological, hence not data-identifiable.
    CHECK_THROWS_AS((void)markov_decompose(scm, kX1, y, std::vector<std::string>{"Z2", "Z1"}), std::invalid_argument);

    // With the explicit model-only flag the quantities are still well-defined
    // in the model and must telescope to the same total.
    DecompositionReport forced = markov_decompose(scm, kX1, y, std::vector<std::string>{"Z2", "Z1"}, true);
    CHECK(near(forced.total, 0.24));
    CHECK(std::fabs(forced.residual) < 1e-12);
    CHECK(forced.ordering == std::vector<std::string>{"U2", "U1"});
    CHECK(near(forced.contributions[0].value,
               56.0 / 25.0 - pa_expectation(scm, "Y", kX1, NameSet{"U2"}), 1e-12));

    // Orders may equivalently name the latent parents of the confounders.
    DecompositionReport by_latents = markov_decompose(scm, kX1, y, std::vector<std::string>{"U1", "U2"});
    CHECK(near(by_latents.contributions[0].value, 2034.0 / 14725.0));
}

TEST_CASE("per-confounder decomposition refuses models with shared latents") {
    Scm scm = load_model(model_path("semimarkov_b3.json"));
    CHECK_THROWS_WITH_AS(
        (void)markov_decompose(scm, kX1, OutcomeQuery::expectation("Y")),
        doctest::Contains("semimarkov_decompose"), std::invalid_argument);
}

TEST_CASE("per-latent decomposition on the model with shared latent parents") {
    Scm scm = load_model(model_path("semimarkov_b3.json"));
    DecompositionReport rep = semimarkov_decompose(scm, kX1, OutcomeQuery::expectation("Y"));

    CHECK(rep.mode == "semi-markovian");
    CHECK(rep.ordering == std::vector<std::string>{"U1X", "U2X"});
    CHECK(near(rep.baseline, 13.0 / 6.0));
    CHECK(near(rep.endpoint, 2.0));
    CHECK(near(rep.total, 1.0 / 6.0));
    REQUIRE(rep.contributions.size() == 2);
    CHECK(near(rep.contributions[0].value, 1.0 / 24.0));
    CHECK(near(rep.contributions[1].value, 1.0 / 8.0));
    CHECK(std::fabs(rep.residual) < 1e-12);

    // The reversed latent order changes the per-latent attribution but not
    // the total: U2X now absorbs 1/24 (vs 1/8 above) and U1X 1/8 (vs 1/24).
    // Note the final step is evaluated interventionally: the direct
    // partially-abducted sum over the full latent set is undefined here.
    DecompositionReport rev =
        semimarkov_decompose(scm, kX1, OutcomeQuery::expectation("Y"),
                             std::vector<std::string>{"U2X", "U1X"});
    CHECK(near(rev.total, 1.0 / 6.0));
    CHECK(std::fabs(rev.residual) < 1e-12);
    REQUIRE(rev.contributions.size() == 2);
    CHECK(rev.contributions[0].label == "U2X");
    CHECK(rev.contributions[1].label == "U1X");
    CHECK(near(rev.contributions[0].value, 1.0 / 24.0));
    CHECK(near(rev.contributions[1].value, 1.0 / 8.0));

    CHECK_THROWS_WITH_AS(
        (void)semimarkov_decompose(scm, kX1, OutcomeQuery::expectation("Y"),
                                  std::vector<std::string>{"U2X"}),
        doctest::Contains("permutation"), std::invalid_argument);
}

TEST_CASE("both decomposition styles agree on a model without shared latents") {
    Scm scm = load_model(model_path("markov_b1.json"));
    OutcomeQuery y = OutcomeQuery::expectation("Y");

    DecompositionReport markov = markov_decompose(scm, kX1, y);
    DecompositionReport semi = semimarkov_decompose(scm, kX1, y);
    REQUIRE(markov.contributions.size() == semi.contributions.size());
    for (std::size_t i = 0; i < markov.contributions.size(); ++i) {
        CHECK(markov.contributions[i].label == semi.contributions[i].label);
        CHECK(near(markov.contributions[i].value, semi.contributions[i].value, 1e-12));
    }
}

TEST_CASE("models with no spurious treks decompose to an empty list") {
    Scm scm = parse_model(R"({
        "endogenous": {"X": [0, 1], "Y": [0, 1]},
        "exogenous": {"UX": {"bernoulli": 0.4}, "UY": {"bernoulli": 0.3}},
        "mechanisms": {
            "X": {"exo_parents": ["UX"], "expr": "UX"},
            "Y": {"parents": ["X"], "exo_parents": ["UY"], "expr": "X != UY ? 1 : 0"}
        }
    })");

    DecompositionReport rep = markov_decompose(scm, kX1, OutcomeQuery::expectation("Y"));
    CHECK(rep.contributions.empty());
    CHECK(near(rep.total, 0.0, 1e-12));
    CHECK(std::fabs(rep.residual) < 1e-12);
}

TEST_CASE("outcome and treatment arguments are validated") {
    Scm scm = load_model(model_path("markov_b1.json"));
    CHECK_THROWS_AS(
        (void)markov_decompose(scm, kX1, OutcomeQuery::expectation("X")),
        std::invalid_argument);
    CHECK_THROWS_AS(
        (void)markov_decompose(scm, Assignment{}, OutcomeQuery::expectation("Y")),
        std::invalid_argument);
    CHECK_THROWS_AS(
        (void)markov_decompose(scm, Assignment{{"X", "1"}, {"Z1", "0"}},
                               OutcomeQuery::expectation("Y")),
        std::invalid_argument);
}

TEST_CASE("telescoping holds on random models without shared latents") {
    SplitMix64 rng(20260813u);
    for (int trial = 0; trial < 30; ++trial) {
        Scm scm = testsupport::random_markovian(rng);
        std::string x_val = rng.next_below(2) == 0 ? "0" : "1";
        Assignment x{{"X", x_val}};
        OutcomeQuery y = rng.next_below(2) == 0 ? OutcomeQuery::expectation("Y")
                                                : OutcomeQuery::event("Y", "2");

        DecompositionReport rep = markov_decompose(scm, x, y);
        CHECK(std::fabs(rep.residual) < 1e-9);
        CHECK(near(rep.total, rep.baseline - rep.endpoint, 1e-12));
        CHECK(near(sum_contributions(rep) + rep.endpoint, rep.baseline, 1e-9));

        TvReport tv = tv_decompose(scm, kX0, kX1, y);
        CHECK(std::fabs(tv.residual()) < 1e-9);
    }
}

TEST_CASE("telescoping holds on random models with shared latents") {
    SplitMix64 rng(9090911u);
    for (int trial = 0; trial < 20; ++trial) {
        Scm scm = testsupport::random_semimarkovian(rng);
        Assignment x{{"X", rng.next_below(2) == 0 ? "0" : "1"}};
        OutcomeQuery y = rng.next_below(2) == 0 ? OutcomeQuery::expectation("Y")
                                                : OutcomeQuery::event("Y", "1");

        DecompositionReport rep = semimarkov_decompose(scm, x, y);
        CHECK(std::fabs(rep.residual) < 1e-9);

        // Random order over the same tops telescopes to the same total.
        std::vector<std::string> order = rep.ordering;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.next_below(i)]);
        }
        DecompositionReport shuffled = semimarkov_decompose(scm, x, y, order);
        CHECK(near(shuffled.total, rep.total, 1e-12));
        CHECK(std::fabs(shuffled.residual) < 1e-9);
    }
}
