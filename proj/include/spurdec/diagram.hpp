#pragma once

// Causal diagrams (mixed graphs with explicit exogenous nodes): projection
// from SCMs, confounder ordering, spurious-trek machinery, anchor sets,
// ancestral-closure checks, and the identification-condition verdict.

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spurdec/model.hpp"

namespace spurdec {

struct CausalDiagram {
    std::vector<std::string> endogenous_nodes;  // declaration order
    std::vector<std::string> exogenous_nodes;
    // Directed edges (exogenous->endogenous and endogenous->endogenous).
    std::vector<std::pair<std::string, std::string>> directed_edges;
    // Derived: pairs of endogenous nodes sharing an exogenous parent.
    std::vector<std::pair<std::string, std::string>> bidirected_edges;

    bool is_endogenous(const std::string& n) const;
    bool is_exogenous(const std::string& n) const;
    const std::vector<std::string>& parents(const std::string& n) const;
    const std::vector<std::string>& children(const std::string& n) const;

    // Nodes reachable from `from` by directed paths, never entering `avoid`.
    std::set<std::string> descendants(const std::string& from, const std::string& avoid = "") const;

    std::map<std::string, std::vector<std::string>> parent_map;  // filled at build
    std::map<std::string, std::vector<std::string>> child_map;
};

struct Trek {
    std::string top;                      // exogenous source
    std::vector<std::string> left_path;   // top -> ... -> X
    std::vector<std::string> right_path;  // top -> ... -> Y
    bool spurious = false;                // right path does not pass through X
};

struct AseacResult {
    bool holds = false;
    std::vector<std::string> witnesses;  // symmetric difference, sorted
};

struct IdVerdict {
    bool identifiable = false;
    std::vector<std::string> reasons;  // failing conditions, human-readable
    std::vector<std::string> anchor;   // anchor set with the outcome excluded, sorted

    std::string verdict() const { return identifiable ? "identifiable" : "not-established"; }
};

// Raised when an estimation query is refused because no implemented condition
// establishes identifiability of the requested quantity.
class NotIdentifiedError : public std::runtime_error {
  public:
    NotIdentifiedError(std::string what, std::vector<std::string> reasons)
        : std::runtime_error(std::move(what)), reasons_(std::move(reasons)) {}
    const std::vector<std::string>& reasons() const { return reasons_; }

  private:
    std::vector<std::string> reasons_;
};

// --- construction ---------------------------------------------------------------

CausalDiagram project(const Scm& scm);
// Build a diagram directly from node/edge lists (validated: edge endpoints
// declared, no edges into exogenous nodes, directed part acyclic).
CausalDiagram make_diagram(std::vector<std::string> endogenous, std::vector<std::string> exogenous,
                           std::vector<std::pair<std::string, std::string>> edges);
// JSON form: {"endogenous": [...], "exogenous": [...], "edges": [[from,to],...]};
// a file containing a full model ("mechanisms" present) is loaded and projected.
CausalDiagram load_diagram(const std::string& path);

// --- classification and ordering --------------------------------------------------

bool is_markovian(const CausalDiagram& d);

// All endogenous nodes lying on the left or right path of some spurious trek
// between X and Y, in a valid topological order (lexicographic tie-break).
std::vector<std::string> confounders_in_topological_order(const CausalDiagram& d,
                                                          const std::string& x,
                                                          const std::string& y);
// Same but with a user-supplied order; throws if it is not a permutation of
// the confounder set or not topologically valid.
std::vector<std::string> confounders_in_topological_order(const CausalDiagram& d,
                                                          const std::string& x,
                                                          const std::string& y,
                                                          const std::vector<std::string>& user_order);

// --- treks and anchor machinery ----------------------------------------------------

// All spurious treks (top, left path to X, right path to Y avoiding X).
// Throws when more than `cap` treks would be enumerated.
std::vector<Trek> spurious_treks(const CausalDiagram& d, const std::string& x,
                                 const std::string& y, std::size_t cap = 100000);

// Exogenous nodes with a directed path to X and a directed path to Y that
// avoids X; sorted by name.
std::vector<std::string> tops_of_spurious_treks(const CausalDiagram& d, const std::string& x,
                                                const std::string& y);

// Union of endogenous children of the given exogenous nodes, minus X.
std::set<std::string> anchor_set(const CausalDiagram& d, const NameSet& u_set,
                                 const std::string& x);

// Members of `u_stot` with a directed path to any node in `nodes`.
std::set<std::string> exogenous_ancestors_in_stot(const CausalDiagram& d, const NameSet& nodes,
                                                  const NameSet& u_stot);

// Anchor-set exogenous ancestral closure: u_set equals the exogenous
// ancestors (within the tops set) of its own anchor set.
AseacResult check_aseac(const CausalDiagram& d, const NameSet& u_set, const std::string& x,
                        const std::string& y);

// Identifiability of P(y | x^{U_s}) from observational data. In addition to
// the two anchor-set conditions (outcome not in the anchor set; ancestral
// closure), the verdict requires two separation conditions on the
// latent-extended graph that make the anchor adjustment formula sound:
// the outcome must be d-separated from U_s given {X} and the anchor set, and
// the anchor set must either be exogenously determined by U_s or d-separated
// from X given U_s. Returns "not-established" (not "non-identifiable") when
// any condition fails, since the conditions are sufficient only.
IdVerdict check_identifiable(const CausalDiagram& d, const NameSet& u_set, const std::string& x,
                             const std::string& y);

// --- utilities ----------------------------------------------------------------------

// d-separation of node sets A and B given C on the directed (latent-extended) graph.
bool d_separated(const CausalDiagram& d, const NameSet& a, const NameSet& b, const NameSet& cond);

// DOT export: directed edges solid, bidirected pairs dashed, exogenous nodes red.
std::string to_dot(const CausalDiagram& d);

}  // namespace spurdec
