#pragma once

// Shared test fixtures: bundled model paths, absolute-tolerance checks, and
// random model generators used by the property tests and the acceptance
// suite. The generators keep P(X=x | any latent slice) >= 1/4 by construction
// (an independent coin can always flip X), so partially-abducted queries and
// plug-in strata stay well-defined on every generated model.

#include <cstdint>
#include <string>
#include <vector>

#include "spurdec/model.hpp"
#include "spurdec/rng.hpp"

namespace testsupport {

inline std::string model_path(const std::string& name) {
    return std::string(SPURDEC_MODELS_DIR) + "/" + name;
}

inline bool near(double a, double b, double tol = 1e-9) {
    double d = a - b;
    return (d < 0 ? -d : d) <= tol;
}

inline spurdec::Variable int_var(const std::string& name, int domain_size) {
    spurdec::Variable v;
    v.name = name;
    for (int i = 0; i < domain_size; ++i) {
        v.domain.push_back(std::to_string(i));
        v.numeric.push_back(static_cast<double>(i));
    }
    v.has_numeric = true;
    return v;
}

inline std::vector<double> random_probs(spurdec::SplitMix64& rng, int k) {
    std::vector<double> p(static_cast<std::size_t>(k));
    double sum = 0;
    for (auto& x : p) {
        x = 0.2 + 0.8 * rng.next_double();
        sum += x;
    }
    for (auto& x : p) {
        x /= sum;
    }
    return p;
}

// Random model without shared exogenous parents: a chain of 1-3 confounders
// (domains of size 2-3, each with a private latent and random dependence on
// earlier confounders), a binary treatment reading all confounders with an
// independent flip, and a three-valued outcome reading the treatment and all
// confounders with private noise.
inline spurdec::Scm random_markovian(spurdec::SplitMix64& rng) {
    using namespace spurdec;
    const int k = 1 + static_cast<int>(rng.next_below(3));

    std::vector<Variable> endo, exo;
    std::vector<Mechanism> mechs;
    std::vector<ExogenousDistribution> dists;

    std::vector<int> zdom(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        zdom[static_cast<std::size_t>(i)] = 2 + static_cast<int>(rng.next_below(2));
        std::string zname = "Z" + std::to_string(i + 1);
        std::string uname = "U" + std::to_string(i + 1);
        endo.push_back(int_var(zname, zdom[static_cast<std::size_t>(i)]));
        exo.push_back(int_var(uname, zdom[static_cast<std::size_t>(i)]));
        dists.push_back(
            ExogenousDistribution{uname, random_probs(rng, zdom[static_cast<std::size_t>(i)])});

        Mechanism m;
        m.target = zname;
        std::size_t cells = static_cast<std::size_t>(zdom[static_cast<std::size_t>(i)]);
        for (int j = 0; j < i; ++j) {
            if (rng.next_below(2) == 1) {
                m.parents.push_back("Z" + std::to_string(j + 1));
                cells *= static_cast<std::size_t>(zdom[static_cast<std::size_t>(j)]);
            }
        }
        m.exo_parents = {uname};
        m.table.resize(cells);
        for (auto& cell : m.table) {
            cell = static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(zdom[static_cast<std::size_t>(i)])));
        }
        mechs.push_back(std::move(m));
    }

    // X = g(Z...) xor (UX == 1), so every confounder stratum keeps both
    // treatment values possible.
    endo.push_back(int_var("X", 2));
    exo.push_back(int_var("UX", 2));
    double flip = 0.25 + 0.5 * rng.next_double();
    dists.push_back(ExogenousDistribution{"UX", {1.0 - flip, flip}});
    {
        Mechanism m;
        m.target = "X";
        std::size_t zcells = 1;
        for (int i = 0; i < k; ++i) {
            m.parents.push_back("Z" + std::to_string(i + 1));
            zcells *= static_cast<std::size_t>(zdom[static_cast<std::size_t>(i)]);
        }
        m.exo_parents = {"UX"};
        m.table.resize(zcells * 2);
        for (std::size_t c = 0; c < zcells; ++c) {
            int base = static_cast<int>(rng.next_below(2));
            m.table[c * 2 + 0] = base;
            m.table[c * 2 + 1] = 1 - base;
        }
        mechs.push_back(std::move(m));
    }

    endo.push_back(int_var("Y", 3));
    exo.push_back(int_var("UY", 2));
    dists.push_back(ExogenousDistribution{"UY", random_probs(rng, 2)});
    {
        Mechanism m;
        m.target = "Y";
        m.parents.push_back("X");
        std::size_t cells = 2;
        for (int i = 0; i < k; ++i) {
            m.parents.push_back("Z" + std::to_string(i + 1));
            cells *= static_cast<std::size_t>(zdom[static_cast<std::size_t>(i)]);
        }
        m.exo_parents = {"UY"};
        m.table.resize(cells * 2);
        for (auto& cell : m.table) {
            cell = static_cast<int>(rng.next_below(3));
        }
        mechs.push_back(std::move(m));
    }

    return Scm(std::move(endo), std::move(exo), std::move(mechs), std::move(dists));
}

// Random model with shared exogenous parents: Z1 shares U1X with X; Z2 either
// shares U2X with X or keeps it private; Z1 optionally feeds Z2; the treatment
// reads its shared latents with an independent three-valued flip; the outcome
// reads (X, Z1, Z2) with private noise.
inline spurdec::Scm random_semimarkovian(spurdec::SplitMix64& rng) {
    using namespace spurdec;
    const bool shared_u2x = rng.next_below(2) == 1;
    const bool chain = rng.next_below(2) == 1;

    std::vector<Variable> endo, exo;
    std::vector<Mechanism> mechs;
    std::vector<ExogenousDistribution> dists;

    auto bern = [&](const std::string& name) {
        exo.push_back(int_var(name, 2));
        double p = 0.2 + 0.6 * rng.next_double();
        dists.push_back(ExogenousDistribution{name, {1.0 - p, p}});
    };
    bern("U1");
    bern("U2");
    bern("U1X");
    bern("U2X");
    bern("UY");
    exo.push_back(int_var("UX", 3));
    dists.push_back(ExogenousDistribution{"UX", {0.25, 0.5, 0.25}});

    endo.push_back(int_var("Z1", 2));
    endo.push_back(int_var("Z2", 2));
    endo.push_back(int_var("X", 2));
    endo.push_back(int_var("Y", 3));

    {
        Mechanism m;
        m.target = "Z1";
        m.exo_parents = {"U1", "U1X"};
        m.table.resize(4);
        for (auto& cell : m.table) {
            cell = static_cast<int>(rng.next_below(2));
        }
        mechs.push_back(std::move(m));
    }
    {
        Mechanism m;
        m.target = "Z2";
        std::size_t cells = 4;
        if (chain) {
            m.parents = {"Z1"};
            cells *= 2;
        }
        m.exo_parents = {"U2", "U2X"};
        m.table.resize(cells);
        for (auto& cell : m.table) {
            cell = static_cast<int>(rng.next_below(2));
        }
        mechs.push_back(std::move(m));
    }
    {
        // X = base(shared latents) xor (UX == 0), P(UX == 0) = 1/4.
        Mechanism m;
        m.target = "X";
        m.exo_parents = {"UX", "U1X"};
        std::size_t shared_cells = 2;
        if (shared_u2x) {
            m.exo_parents.push_back("U2X");
            shared_cells *= 2;
        }
        m.table.resize(3 * shared_cells);
        std::vector<int> base(shared_cells);
        for (auto& b : base) {
            b = static_cast<int>(rng.next_below(2));
        }
        for (std::size_t ux = 0; ux < 3; ++ux) {
            for (std::size_t s = 0; s < shared_cells; ++s) {
                int v = base[s];
                if (ux == 0) {
                    v = 1 - v;
                }
                m.table[ux * shared_cells + s] = v;
            }
        }
        mechs.push_back(std::move(m));
    }
    {
        Mechanism m;
        m.target = "Y";
        m.parents = {"X", "Z1", "Z2"};
        m.exo_parents = {"UY"};
        m.table.resize(16);
        for (auto& cell : m.table) {
            cell = static_cast<int>(rng.next_below(3));
        }
        mechs.push_back(std::move(m));
    }

    return Scm(std::move(endo), std::move(exo), std::move(mechs), std::move(dists));
}

}  // namespace testsupport
