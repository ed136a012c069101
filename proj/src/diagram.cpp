#include "spurdec/diagram.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace spurdec {

namespace {

const std::vector<std::string> kNoNodes;

void require_node(const CausalDiagram& d, const std::string& n, const char* role) {
    if (!d.is_endogenous(n)) {
        throw std::invalid_argument(std::string(role) + " '" + n +
                                    "' is not an endogenous node of the diagram");
    }
}

}  // namespace

bool CausalDiagram::is_endogenous(const std::string& n) const {
    return std::find(endogenous_nodes.begin(), endogenous_nodes.end(), n) !=
           endogenous_nodes.end();
}

bool CausalDiagram::is_exogenous(const std::string& n) const {
    return std::find(exogenous_nodes.begin(), exogenous_nodes.end(), n) != exogenous_nodes.end();
}

const std::vector<std::string>& CausalDiagram::parents(const std::string& n) const {
    auto it = parent_map.find(n);
    return it == parent_map.end() ? kNoNodes : it->second;
}

const std::vector<std::string>& CausalDiagram::children(const std::string& n) const {
    auto it = child_map.find(n);
    return it == child_map.end() ? kNoNodes : it->second;
}

std::set<std::string> CausalDiagram::descendants(const std::string& from,
                                                 const std::string& avoid) const {
    std::set<std::string> out;
    std::vector<std::string> stack{from};
    while (!stack.empty()) {
        std::string v = stack.back();
        stack.pop_back();
        for (const auto& c : children(v)) {
            if (c == avoid || out.count(c)) {
                continue;
            }
            out.insert(c);
            stack.push_back(c);
        }
    }
    return out;
}

CausalDiagram make_diagram(std::vector<std::string> endogenous, std::vector<std::string> exogenous,
                           std::vector<std::pair<std::string, std::string>> edges) {
    CausalDiagram d;
    d.endogenous_nodes = std::move(endogenous);
    d.exogenous_nodes = std::move(exogenous);
    d.directed_edges = std::move(edges);
    for (const auto& n : d.endogenous_nodes) {
        d.parent_map[n];
        d.child_map[n];
    }
    for (const auto& n : d.exogenous_nodes) {
        if (d.parent_map.count(n)) {
            throw std::invalid_argument("node '" + n + "' declared twice");
        }
        d.parent_map[n];
        d.child_map[n];
    }
    if (d.parent_map.size() != d.endogenous_nodes.size() + d.exogenous_nodes.size()) {
        throw std::invalid_argument("diagram node names must be unique");
    }
    for (const auto& [from, to] : d.directed_edges) {
        if (!d.parent_map.count(from) || !d.parent_map.count(to)) {
            throw std::invalid_argument("edge (" + from + " -> " + to +
                                        ") references an undeclared node");
        }
        if (d.is_exogenous(to)) {
            throw std::invalid_argument("edge (" + from + " -> " + to +
                                        ") points into an exogenous node");
        }
        d.parent_map[to].push_back(from);
        d.child_map[from].push_back(to);
    }

    // Acyclicity of the directed part.
    std::map<std::string, int> indegree;
    for (const auto& [n, ps] : d.parent_map) {
        indegree[n] = static_cast<int>(ps.size());
    }
    std::vector<std::string> ready;
    for (const auto& [n, deg] : indegree) {
        if (deg == 0) {
            ready.push_back(n);
        }
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        std::string v = ready.back();
        ready.pop_back();
        ++seen;
        for (const auto& c : d.child_map[v]) {
            if (--indegree[c] == 0) {
                ready.push_back(c);
            }
        }
    }
    if (seen != indegree.size()) {
        throw std::invalid_argument("diagram contains a directed cycle");
    }

    // Derive bidirected edges: endogenous pairs sharing an exogenous parent.
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& u : d.exogenous_nodes) {
        const auto& ch = d.children(u);
        for (std::size_t i = 0; i < ch.size(); ++i) {
            for (std::size_t j = i + 1; j < ch.size(); ++j) {
                auto a = ch[i];
                auto b = ch[j];
                if (a > b) {
                    std::swap(a, b);
                }
                pairs.insert({a, b});
            }
        }
    }
    d.bidirected_edges.assign(pairs.begin(), pairs.end());
    return d;
}

CausalDiagram project(const Scm& scm) {
    std::vector<std::string> endo, exo;
    for (const auto& v : scm.endogenous()) {
        endo.push_back(v.name);
    }
    for (const auto& v : scm.exogenous()) {
        exo.push_back(v.name);
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& m : scm.mechanisms()) {
        for (const auto& p : m.parents) {
            edges.emplace_back(p, m.target);
        }
        for (const auto& p : m.exo_parents) {
            edges.emplace_back(p, m.target);
        }
    }
    return make_diagram(std::move(endo), std::move(exo), std::move(edges));
}

CausalDiagram load_diagram(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open diagram file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(buf.str());
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("diagram JSON parse error: ") + e.what());
    }
    if (j.contains("mechanisms")) {
        return project(parse_model(buf.str()));
    }
    if (!j.contains("endogenous") || !j.contains("exogenous") || !j.contains("edges")) {
        throw std::invalid_argument(
            "diagram JSON must contain 'endogenous', 'exogenous' and 'edges' (or be a full "
            "model)");
    }
    std::vector<std::string> endo, exo;
    for (const auto& n : j["endogenous"]) {
        endo.push_back(n.get<std::string>());
    }
    for (const auto& n : j["exogenous"]) {
        exo.push_back(n.get<std::string>());
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2) {
            throw std::invalid_argument("diagram edges must be [from, to] pairs");
        }
        edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return make_diagram(std::move(endo), std::move(exo), std::move(edges));
}

bool is_markovian(const CausalDiagram& d) {
    return d.bidirected_edges.empty();
}

std::vector<std::string> tops_of_spurious_treks(const CausalDiagram& d, const std::string& x,
                                                const std::string& y) {
    require_node(d, x, "treatment");
    require_node(d, y, "outcome");
    std::vector<std::string> tops;
    for (const auto& u : d.exogenous_nodes) {
        auto to_x = d.descendants(u);
        if (!to_x.count(x)) {
            continue;
        }
        auto avoiding = d.descendants(u, x);
        if (avoiding.count(y)) {
            tops.push_back(u);
        }
    }
    std::sort(tops.begin(), tops.end());
    return tops;
}

namespace {

// All directed paths from `from` to `to`, optionally never entering `avoid`.
void enumerate_paths(const CausalDiagram& d, const std::string& from, const std::string& to,
                     const std::string& avoid, std::vector<std::string>& prefix,
                     std::vector<std::vector<std::string>>& out, std::size_t cap) {
    if (from == to) {
        out.push_back(prefix);
        return;
    }
    for (const auto& c : d.children(from)) {
        if (c == avoid) {
            continue;
        }
        if (out.size() > cap) {
            return;
        }
        prefix.push_back(c);
        enumerate_paths(d, c, to, avoid, prefix, out, cap);
        prefix.pop_back();
    }
}

std::vector<std::vector<std::string>> paths_between(const CausalDiagram& d,
                                                    const std::string& from,
                                                    const std::string& to,
                                                    const std::string& avoid, std::size_t cap) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> prefix{from};
    enumerate_paths(d, from, to, avoid, prefix, out, cap);
    return out;
}

}  // namespace

std::vector<Trek> spurious_treks(const CausalDiagram& d, const std::string& x,
                                 const std::string& y, std::size_t cap) {
    require_node(d, x, "treatment");
    require_node(d, y, "outcome");
    std::vector<Trek> treks;
    for (const auto& u : tops_of_spurious_treks(d, x, y)) {
        auto lefts = paths_between(d, u, x, "", cap);
        auto rights = paths_between(d, u, y, x, cap);
        for (const auto& l : lefts) {
            for (const auto& r : rights) {
                if (treks.size() >= cap) {
                    throw std::runtime_error(
                        "spurious trek enumeration exceeded the cap of " + std::to_string(cap) +
                        " treks; use tops_of_spurious_treks for reachability-only queries");
                }
                treks.push_back(Trek{u, l, r, true});
            }
        }
    }
    return treks;
}

std::vector<std::string> confounders_in_topological_order(const CausalDiagram& d,
                                                          const std::string& x,
                                                          const std::string& y) {
    require_node(d, x, "treatment");
    require_node(d, y, "outcome");
    auto tops = tops_of_spurious_treks(d, x, y);
    std::set<std::string> members;
    for (const auto& u : tops) {
        // Left-path members: between the top and X on a causal path.
        auto from_u = d.descendants(u);
        for (const auto& z : from_u) {
            if (!d.is_endogenous(z) || z == x || z == y) {
                continue;
            }
            if (d.descendants(z).count(x)) {
                members.insert(z);
            }
        }
        // Right-path members: the whole path avoids X.
        auto from_u_avoiding = d.descendants(u, x);
        for (const auto& z : from_u_avoiding) {
            if (!d.is_endogenous(z) || z == x || z == y) {
                continue;
            }
            if (d.descendants(z, x).count(y)) {
                members.insert(z);
            }
        }
    }

    // Kahn's algorithm over the full graph with a lexicographic ready set
    // yields a deterministic valid topological order; filter to members.
    std::map<std::string, int> indegree;
    for (const auto& [n, ps] : d.parent_map) {
        indegree[n] = static_cast<int>(ps.size());
    }
    std::set<std::string> ready;
    for (const auto& [n, deg] : indegree) {
        if (deg == 0) {
            ready.insert(n);
        }
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string v = *ready.begin();
        ready.erase(ready.begin());
        if (members.count(v)) {
            order.push_back(v);
        }
        for (const auto& c : d.children(v)) {
            if (--indegree[c] == 0) {
                ready.insert(c);
            }
        }
    }
    return order;
}

std::vector<std::string> confounders_in_topological_order(const CausalDiagram& d,
                                                          const std::string& x,
                                                          const std::string& y,
                                                          const std::vector<std::string>& user_order) {
    auto def = confounders_in_topological_order(d, x, y);
    std::set<std::string> expect(def.begin(), def.end());
    std::set<std::string> got(user_order.begin(), user_order.end());
    if (expect != got || user_order.size() != def.size()) {
        throw std::invalid_argument(
            "user-supplied confounder order must be a permutation of the confounder set");
    }
    for (std::size_t i = 0; i < user_order.size(); ++i) {
        for (std::size_t j = i + 1; j < user_order.size(); ++j) {
            if (d.descendants(user_order[j]).count(user_order[i])) {
                throw std::invalid_argument("user-supplied confounder order is not topologically "
                                            "valid: '" +
                                            user_order[i] + "' is a descendant of '" +
                                            user_order[j] + "' but is listed before it");
            }
        }
    }
    return user_order;
}

std::set<std::string> anchor_set(const CausalDiagram& d, const NameSet& u_set,
                                 const std::string& x) {
    std::set<std::string> out;
    for (const auto& u : u_set) {
        if (!d.is_exogenous(u)) {
            throw std::invalid_argument("anchor set requested for non-exogenous node '" + u +
                                        "'");
        }
        for (const auto& c : d.children(u)) {
            if (c != x) {
                out.insert(c);
            }
        }
    }
    return out;
}

std::set<std::string> exogenous_ancestors_in_stot(const CausalDiagram& d, const NameSet& nodes,
                                                  const NameSet& u_stot) {
    std::set<std::string> out;
    for (const auto& u : u_stot) {
        auto desc = d.descendants(u);
        for (const auto& n : nodes) {
            if (desc.count(n)) {
                out.insert(u);
                break;
            }
        }
    }
    return out;
}

namespace {

void require_subset_of_tops(const CausalDiagram& d, const NameSet& u_set, const std::string& x,
                            const std::string& y, NameSet& tops_out) {
    auto tops = tops_of_spurious_treks(d, x, y);
    tops_out = NameSet(tops.begin(), tops.end());
    for (const auto& u : u_set) {
        if (!tops_out.count(u)) {
            throw std::invalid_argument("latent set member '" + u +
                                        "' is not a top of any spurious trek between " + x +
                                        " and " + y);
        }
    }
}

}  // namespace

AseacResult check_aseac(const CausalDiagram& d, const NameSet& u_set, const std::string& x,
                        const std::string& y) {
    NameSet tops;
    require_subset_of_tops(d, u_set, x, y, tops);
    auto anchors = anchor_set(d, u_set, x);
    auto closure = exogenous_ancestors_in_stot(d, NameSet(anchors.begin(), anchors.end()), tops);
    AseacResult res;
    res.holds = closure == u_set;
    if (!res.holds) {
        std::set_symmetric_difference(closure.begin(), closure.end(), u_set.begin(), u_set.end(),
                                      std::back_inserter(res.witnesses));
    }
    return res;
}

namespace {

// All exogenous ancestors (not restricted to the tops set) of a node set.
std::set<std::string> exogenous_ancestors(const CausalDiagram& d, const std::set<std::string>& nodes) {
    std::set<std::string> out;
    for (const auto& u : d.exogenous_nodes) {
        auto desc = d.descendants(u);
        for (const auto& n : nodes) {
            if (desc.count(n)) {
                out.insert(u);
                break;
            }
        }
    }
    return out;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) {
            out += ", ";
        }
        out += n;
    }
    return out;
}

}  // namespace

bool d_separated(const CausalDiagram& d, const NameSet& a, const NameSet& b,
                 const NameSet& cond) {
    // Bayes-ball reachability: returns false as soon as any node of b is
    // reached from a by an active path given cond.
    std::set<std::string> anc_cond;
    {
        std::vector<std::string> stack(cond.begin(), cond.end());
        while (!stack.empty()) {
            std::string v = stack.back();
            stack.pop_back();
            if (anc_cond.count(v)) {
                continue;
            }
            anc_cond.insert(v);
            for (const auto& p : d.parents(v)) {
                stack.push_back(p);
            }
        }
    }
    // State: (node, arrived-from-child?) — "up" means the ball moved against
    // edge direction into this node.
    std::set<std::pair<std::string, bool>> visited;
    std::vector<std::pair<std::string, bool>> stack;
    for (const auto& s : a) {
        stack.emplace_back(s, true);
    }
    while (!stack.empty()) {
        auto [v, up] = stack.back();
        stack.pop_back();
        if (visited.count({v, up})) {
            continue;
        }
        visited.insert({v, up});
        if (b.count(v) && !cond.count(v)) {
            return false;
        }
        if (up && !cond.count(v)) {
            for (const auto& p : d.parents(v)) {
                stack.emplace_back(p, true);
            }
            for (const auto& c : d.children(v)) {
                stack.emplace_back(c, false);
            }
        } else if (!up) {
            if (!cond.count(v)) {
                for (const auto& c : d.children(v)) {
                    stack.emplace_back(c, false);
                }
            }
            if (anc_cond.count(v)) {
                for (const auto& p : d.parents(v)) {
                    stack.emplace_back(p, true);
                }
            }
        }
    }
    return true;
}

IdVerdict check_identifiable(const CausalDiagram& d, const NameSet& u_set, const std::string& x,
                             const std::string& y) {
    NameSet tops;
    require_subset_of_tops(d, u_set, x, y, tops);

    IdVerdict verdict;
    auto anchors_full = anchor_set(d, u_set, x);
    std::set<std::string> anchors = anchors_full;
    anchors.erase(y);
    verdict.anchor.assign(anchors.begin(), anchors.end());

    bool ok = true;
    if (anchors_full.count(y)) {
        ok = false;
        verdict.reasons.push_back("outcome-in-anchor-set: " + y +
                                  " is directly influenced by the latent set");
    }
    auto aseac = check_aseac(d, u_set, x, y);
    if (!aseac.holds) {
        ok = false;
        verdict.reasons.push_back("anchor-closure-violated: the anchor set has exogenous "
                                  "ancestors among the trek tops outside the latent set "
                                  "(witnesses: " +
                                  join_names(aseac.witnesses) + ")");
    }
    if (!u_set.empty()) {
        NameSet cond(anchors.begin(), anchors.end());
        cond.insert(x);
        if (!d_separated(d, u_set, NameSet{y}, cond)) {
            ok = false;
            verdict.reasons.push_back(
                "outcome-dependence: " + y +
                " is not d-separated from the latent set given the treatment and the anchor "
                "set, so conditioning on the treatment leaks latent information past the "
                "anchors");
        }
        if (!anchors.empty()) {
            auto exo_anc = exogenous_ancestors(d, anchors);
            bool determined = std::includes(u_set.begin(), u_set.end(), exo_anc.begin(),
                                            exo_anc.end());
            if (!determined &&
                !d_separated(d, NameSet(anchors.begin(), anchors.end()), NameSet{x}, u_set)) {
                ok = false;
                verdict.reasons.push_back(
                    "anchor-treatment-dependence: the anchor set is neither exogenously "
                    "determined by the latent set nor d-separated from the treatment given "
                    "it, so its distribution responds to conditioning on the treatment");
            }
        }
    }
    verdict.identifiable = ok;
    return verdict;
}

std::string to_dot(const CausalDiagram& d) {
    std::ostringstream out;
    out << "digraph G {\n  rankdir=LR;\n";
    for (const auto& n : d.endogenous_nodes) {
        out << "  \"" << n << "\" [shape=ellipse];\n";
    }
    for (const auto& n : d.exogenous_nodes) {
        out << "  \"" << n << "\" [shape=circle, color=red, fontcolor=red];\n";
    }
    for (const auto& [from, to] : d.directed_edges) {
        out << "  \"" << from << "\" -> \"" << to << "\";\n";
    }
    for (const auto& [a, b] : d.bidirected_edges) {
        out << "  \"" << a << "\" -> \"" << b << "\" [dir=both, style=dashed, constraint=false];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace spurdec
