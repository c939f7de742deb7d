#pragma once
// Identifiability graph construction and connectivity testing.
//
// One node per bias factor; an edge joins two bias factors whenever some
// feature co-occurs with both. Relevance is recoverable up to a global
// scaling exactly when this graph is connected, so the identifiability check
// reduces to counting connected components.

#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"

namespace ultr {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0u);
    }

    std::uint32_t find(std::uint32_t v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    // Unions by smaller root index so representatives stay deterministic.
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::uint32_t> parent_;
};

struct IgEdge {
    BiasFactorId a;  // a < b
    BiasFactorId b;
    std::vector<FeatureId> witnesses;  // features that induced the edge (capped)
};

struct IgOptions {
    std::size_t witness_cap = 8;
    // Features co-occurring with more bias factors than this produce a
    // warning: each such feature materializes a quadratic clique.
    std::size_t clique_warn_threshold = 1000;
};

struct IdentifiabilityGraph {
    std::size_t node_count = 0;
    std::vector<IgEdge> edges;  // sorted by (a, b), deduplicated
    std::vector<std::string> warnings;
};

struct ComponentDecomposition {
    std::size_t count = 0;                            // K
    std::vector<std::uint32_t> component_of;          // per bias node
    std::vector<std::vector<BiasFactorId>> nodes;     // per component, ascending
    std::vector<std::vector<FeatureId>> features;     // {x | (x,t) in D, t in component}
};

inline IdentifiabilityGraph build_ig(const Dataset& d, const IgOptions& opts = {}) {
    if (d.empty()) throw std::invalid_argument("cannot build an IG from an empty dataset");
    IdentifiabilityGraph g;
    g.node_count = d.bias_count();

    // feature -> sorted list of co-occurring bias factors, then cliques.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<FeatureId>> edges;
    const auto records = d.records();
    for (std::uint32_t x = 0; x < d.feature_count(); ++x) {
        const auto& recs = d.records_of_feature()[x];
        std::vector<std::uint32_t> biases;
        biases.reserve(recs.size());
        for (const auto ri : recs) biases.push_back(records[ri].bias.value);
        std::sort(biases.begin(), biases.end());
        if (biases.size() > opts.clique_warn_threshold) {
            g.warnings.push_back("feature '" + d.feature_name(FeatureId{x}) +
                                 "' co-occurs with " + std::to_string(biases.size()) +
                                 " bias factors; its clique is quadratic in that count");
        }
        for (std::size_t i = 0; i < biases.size(); ++i) {
            for (std::size_t j = i + 1; j < biases.size(); ++j) {
                auto& witnesses = edges[{biases[i], biases[j]}];
                if (witnesses.size() < opts.witness_cap) witnesses.push_back(FeatureId{x});
            }
        }
    }
    g.edges.reserve(edges.size());
    for (auto& [key, witnesses] : edges) {
        g.edges.push_back(IgEdge{BiasFactorId{key.first}, BiasFactorId{key.second},
                                 std::move(witnesses)});
    }
    return g;
}

// Connected components via union-find; components are numbered by their
// smallest contained node index.
inline ComponentDecomposition components(const IdentifiabilityGraph& g, const Dataset& d) {
    ComponentDecomposition out;
    const auto n = static_cast<std::uint32_t>(g.node_count);
    DisjointSets dsu(n);
    for (const auto& e : g.edges) dsu.unite(e.a.value, e.b.value);

    out.component_of.assign(n, 0);
    std::map<std::uint32_t, std::uint32_t> root_to_component;  // ordered by root = min node
    for (std::uint32_t v = 0; v < n; ++v) {
        const auto root = dsu.find(v);
        auto [it, inserted] =
            root_to_component.try_emplace(root, static_cast<std::uint32_t>(root_to_component.size()));
        out.component_of[v] = it->second;
    }
    out.count = root_to_component.size();
    out.nodes.assign(out.count, {});
    for (std::uint32_t v = 0; v < n; ++v) {
        out.nodes[out.component_of[v]].push_back(BiasFactorId{v});
    }
    // All bias factors of a record share its feature, so a feature belongs to
    // exactly one component.
    out.features.assign(out.count, {});
    const auto records = d.records();
    for (std::uint32_t x = 0; x < d.feature_count(); ++x) {
        const auto& recs = d.records_of_feature()[x];
        if (recs.empty()) continue;
        const auto comp = out.component_of[records[recs.front()].bias.value];
        out.features[comp].push_back(FeatureId{x});
    }
    return out;
}

struct IdentifiabilityReport {
    bool identifiable = false;
    ComponentDecomposition decomposition;
};

inline IdentifiabilityReport is_identifiable(const Dataset& d) {
    const auto g = build_ig(d);
    IdentifiabilityReport report;
    report.decomposition = components(g, d);
    report.identifiable = report.decomposition.count == 1;
    return report;
}

// The two-scaling construction behind the "only if" direction: scale
// relevance by `alpha` on the first component's features and by `beta`
// elsewhere, scale observation reciprocally. Every click rate is reproduced
// exactly while the relevance ratio differs across components.
struct ScaledModels {
    std::vector<double> relevance;    // per feature index
    std::vector<double> observation;  // per bias index
};

inline ScaledModels scaling_counterexample(const Dataset& d,
                                           const ComponentDecomposition& comp,
                                           std::span<const double> relevance,
                                           std::span<const double> observation,
                                           double alpha, double beta) {
    if (relevance.size() != d.feature_count() || observation.size() != d.bias_count()) {
        throw std::invalid_argument("model sizes do not match the dataset");
    }
    if (alpha <= 0.0 || beta <= 0.0) {
        throw std::invalid_argument("scaling factors must be positive");
    }
    ScaledModels out;
    out.relevance.assign(relevance.begin(), relevance.end());
    out.observation.assign(observation.begin(), observation.end());
    std::vector<std::uint32_t> feature_component(d.feature_count(), 0);
    for (std::uint32_t c = 0; c < comp.count; ++c) {
        for (const auto x : comp.features[c]) feature_component[x.value] = c;
    }
    for (std::uint32_t x = 0; x < d.feature_count(); ++x) {
        out.relevance[x] *= feature_component[x] == 0 ? alpha : beta;
    }
    for (std::uint32_t t = 0; t < d.bias_count(); ++t) {
        out.observation[t] /= comp.component_of[t] == 0 ? alpha : beta;
    }
    return out;
}

inline std::string to_dot(const IdentifiabilityGraph& g, const Dataset& d) {
    std::ostringstream out;
    out << "graph identifiability {\n";
    std::vector<bool> has_edge(g.node_count, false);
    for (const auto& e : g.edges) {
        has_edge[e.a.value] = has_edge[e.b.value] = true;
        out << "  \"" << d.bias_name(e.a) << "\" -- \"" << d.bias_name(e.b) << "\"";
        if (!e.witnesses.empty()) {
            out << " [label=\"" << d.feature_name(e.witnesses.front());
            if (e.witnesses.size() > 1) out << ",...";
            out << "\"]";
        }
        out << ";\n";
    }
    for (std::uint32_t v = 0; v < g.node_count; ++v) {
        if (!has_edge[v]) out << "  \"" << d.bias_name(BiasFactorId{v}) << "\";\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace ultr
