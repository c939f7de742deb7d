#pragma once
// Repair planning for disconnected identifiability graphs.
//
// Two strategies restore connectivity with K-1 operations, one per edge of a
// minimum spanning tree over the component graph (Prim):
//   * node intervention - swap a feature to a bias factor in another
//     component and collect fresh clicks for the new pair; the edge cost is
//     the variance proxy 1/(r(x)o(t1)) + 1/(r(x)o(t2)) - 2.
//   * node merging - force two bias factors to share one observation
//     parameter; the edge cost is the Euclidean distance between their bias
//     feature vectors.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/ig.hpp"
#include "ultr/io.hpp"
#include "ultr/rng.hpp"

namespace ultr {

// Relevance/observation guesses driving intervention costs. Any rational
// guess works; values are floored at kGuessFloor on construction because the
// cost diverges as a guess approaches zero.
class GuessModels {
public:
    static constexpr double kGuessFloor = 1e-6;

    static GuessModels from_values(std::vector<double> relevance,
                                   std::vector<double> observation) {
        GuessModels g;
        g.relevance_ = std::move(relevance);
        g.observation_ = std::move(observation);
        for (auto& v : g.relevance_) v = std::max(v, kGuessFloor);
        for (auto& v : g.observation_) v = std::max(v, kGuessFloor);
        return g;
    }

    static GuessModels uniform(const Dataset& d, double value = 0.5) {
        return from_values(std::vector<double>(d.feature_count(), value),
                           std::vector<double>(d.bias_count(), value));
    }

    double relevance(FeatureId x) const {
        if (x.value >= relevance_.size()) {
            throw std::out_of_range("no relevance guess for feature index " +
                                    std::to_string(x.value));
        }
        return checked(relevance_[x.value]);
    }

    double observation(BiasFactorId t) const {
        if (t.value >= observation_.size()) {
            throw std::out_of_range("no observation guess for bias index " +
                                    std::to_string(t.value));
        }
        return checked(observation_[t.value]);
    }

private:
    static double checked(double v) {
        if (!(v > 0.0)) throw std::invalid_argument("guess values must be positive");
        return v;
    }

    std::vector<double> relevance_;
    std::vector<double> observation_;
};

// Variance proxy for swapping feature x between bias factors t1 and t2. The
// constant factor R of the underlying variance is dropped; it does not affect
// the argmin.
inline double intervention_cost(FeatureId x, BiasFactorId t1, BiasFactorId t2,
                                const GuessModels& g) {
    const double r = g.relevance(x);
    return 1.0 / (r * g.observation(t1)) + 1.0 / (r * g.observation(t2)) - 2.0;
}

// Asymptotic variance of o'(t1)/o(t1) - o'(t2)/o(t2) when the swapped pair
// collects N clicks and R = r'(x)^2 / r(x)^2.
inline double predicted_swap_variance(FeatureId x, BiasFactorId t1, BiasFactorId t2,
                                      const GuessModels& g, std::uint64_t n_clicks,
                                      double r_factor) {
    if (n_clicks == 0) throw std::invalid_argument("N must be >= 1");
    if (!(r_factor > 0.0)) throw std::invalid_argument("R must be positive");
    return intervention_cost(x, t1, t2, g) /
           (static_cast<double>(n_clicks) * r_factor);
}

struct InterventionEntry {
    FeatureId feature;
    BiasFactorId target_bias;  // the new observation the feature is swapped to
    double cost = 0.0;
};

struct InterventionPlan {
    std::vector<InterventionEntry> entries;  // K-1 swaps in Prim order
    double total_cost = 0.0;
};

enum class InterventionStrategy { kMinCost, kRandomCost };

struct PlannerOptions {
    // Deterministic truncation bound on (feature, source, target) candidates
    // evaluated per component pair and direction.
    std::size_t max_candidates_per_pair = 10000;
};

namespace detail {

template <typename Entry>
struct PrimEdge {
    double cost = std::numeric_limits<double>::infinity();
    Entry entry{};
};

// Prim's MST over the K components. `best` computes the cheapest connector
// between an unfound and a found component; it is evaluated O(K^2) times in
// total by tracking, per unfound component, the cheapest edge into the found
// set. Equal costs keep the earlier found endpoint; the step winner is the
// lowest-indexed unfound component among the minima.
template <typename Entry, typename BestFn>
std::vector<PrimEdge<Entry>> prim_over_components(std::size_t k, const BestFn& best) {
    std::vector<PrimEdge<Entry>> plan;
    if (k <= 1) return plan;
    std::vector<bool> found(k, false);
    found[0] = true;
    std::vector<std::optional<PrimEdge<Entry>>> reach(k);
    for (std::uint32_t i = 1; i < k; ++i) reach[i] = best(i, 0);
    for (std::size_t step = 1; step < k; ++step) {
        std::optional<std::uint32_t> winner;
        for (std::uint32_t i = 1; i < k; ++i) {
            if (found[i] || !reach[i]) continue;
            if (!winner || reach[i]->cost < reach[*winner]->cost) winner = i;
        }
        if (!winner) {
            throw std::runtime_error("component graph has no connecting candidates");
        }
        plan.push_back(*reach[*winner]);
        found[*winner] = true;
        for (std::uint32_t i = 1; i < k; ++i) {
            if (found[i]) continue;
            auto candidate = best(i, *winner);
            if (candidate && (!reach[i] || candidate->cost < reach[i]->cost)) {
                reach[i] = std::move(candidate);
            }
        }
    }
    return plan;
}

struct InterventionTag {
    std::uint32_t unfound_component = 0;
    InterventionEntry entry;
};

struct MergeTag {
    std::uint32_t unfound_component = 0;
    BiasFactorId bias_a;
    BiasFactorId bias_b;
};

}  // namespace detail

// Plans K-1 swaps connecting the IG. For each component pair both swap
// directions are scored and the cheaper one wins (the first direction wins
// exact ties). Candidates tie-break lexicographically on
// (feature index, source bias, target bias).
inline InterventionPlan plan_intervention(const Dataset& d, const GuessModels& guesses,
                                          InterventionStrategy strategy,
                                          std::uint64_t seed,
                                          const PlannerOptions& opts = {}) {
    const auto comp = components(build_ig(d), d);
    InterventionPlan plan;
    if (comp.count <= 1) return plan;

    const auto records = d.records();

    struct Candidate {
        double cost = std::numeric_limits<double>::infinity();
        std::uint32_t feature = 0;
        std::uint32_t source = 0;
        std::uint32_t target = 0;
        bool valid = false;

        bool better_than(const Candidate& other) const {
            if (!other.valid) return true;
            if (cost != other.cost) return cost < other.cost;
            if (feature != other.feature) return feature < other.feature;
            if (source != other.source) return source < other.source;
            return target < other.target;
        }
    };

    // Best (x, t_src, t_dst) with x drawn from the records of `from` and the
    // swap target inside `to`.
    const auto best_direction = [&](std::uint32_t from, std::uint32_t to) {
        Candidate best;
        std::size_t evaluated = 0;
        for (const auto t_src : comp.nodes[from]) {
            for (const auto ri : d.records_of_bias()[t_src.value]) {
                const auto x = records[ri].feature;
                for (const auto t_dst : comp.nodes[to]) {
                    if (evaluated++ >= opts.max_candidates_per_pair) return best;
                    Candidate c;
                    c.cost = strategy == InterventionStrategy::kMinCost
                                 ? intervention_cost(x, t_src, t_dst, guesses)
                                 : hash_to_unit(seed, x.value, t_src.value, t_dst.value);
                    c.feature = x.value;
                    c.source = t_src.value;
                    c.target = t_dst.value;
                    c.valid = true;
                    if (c.better_than(best)) best = c;
                }
            }
        }
        return best;
    };

    const auto best = [&](std::uint32_t unfound, std::uint32_t found)
        -> std::optional<detail::PrimEdge<detail::InterventionTag>> {
        const Candidate forward = best_direction(unfound, found);
        const Candidate backward = best_direction(found, unfound);
        if (!forward.valid && !backward.valid) return std::nullopt;
        // Swap from the unfound component wins ties.
        const bool use_forward = forward.valid && (!backward.valid || forward.cost <= backward.cost);
        const Candidate& chosen = use_forward ? forward : backward;
        detail::PrimEdge<detail::InterventionTag> edge;
        edge.cost = chosen.cost;
        edge.entry.unfound_component = unfound;
        edge.entry.entry =
            InterventionEntry{FeatureId{chosen.feature}, BiasFactorId{chosen.target}, chosen.cost};
        return edge;
    };

    for (const auto& edge : detail::prim_over_components<detail::InterventionTag>(comp.count, best)) {
        plan.entries.push_back(edge.entry.entry);
        plan.total_cost += edge.cost;
    }
    return plan;
}

// Euclidean distance between bias feature vectors.
inline double merging_cost(BiasFactorId t1, BiasFactorId t2, const Dataset& d,
                           const BiasFeatureTable& bf) {
    const auto& a = bf.at(d.bias_name(t1));
    const auto& b = bf.at(d.bias_name(t2));
    if (a.size() != b.size()) {
        throw std::invalid_argument("bias feature dimension mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double delta = a[i] - b[i];
        sum += delta * delta;
    }
    return std::sqrt(sum);
}

struct MergeEntry {
    BiasFactorId bias_a;
    BiasFactorId bias_b;
    double cost = 0.0;
};

struct MergePlan {
    std::vector<MergeEntry> entries;  // K-1 merges in Prim order
    double total_cost = 0.0;
    // Original bias name -> merged bias name, for every bias touched by a
    // merge group. Identity mappings are omitted.
    std::map<std::string, std::string> relabeling;
};

inline std::string merged_bias_name(std::vector<std::string> members) {
    std::sort(members.begin(), members.end());
    std::string name = "merge(";
    for (std::size_t i = 0; i < members.size(); ++i) {
        name += (i ? "," : "");
        name += members[i];
    }
    name += ")";
    return name;
}

// Plans K-1 merges; each MST edge contributes the closest cross-component
// bias pair (ties break on the smaller bias indices).
inline MergePlan plan_merge(const Dataset& d, const BiasFeatureTable& bf) {
    const auto comp = components(build_ig(d), d);
    MergePlan plan;
    if (comp.count <= 1) return plan;

    for (std::uint32_t t = 0; t < d.bias_count(); ++t) {
        if (!bf.contains(d.bias_name(BiasFactorId{t}))) {
            throw std::invalid_argument("bias feature table has no entry for '" +
                                        d.bias_name(BiasFactorId{t}) + "'");
        }
    }

    const auto best = [&](std::uint32_t unfound, std::uint32_t found)
        -> std::optional<detail::PrimEdge<detail::MergeTag>> {
        detail::PrimEdge<detail::MergeTag> edge;
        bool any = false;
        for (const auto ta : comp.nodes[unfound]) {
            for (const auto tb : comp.nodes[found]) {
                const double cost = merging_cost(ta, tb, d, bf);
                const bool better =
                    !any || cost < edge.cost ||
                    (cost == edge.cost &&
                     std::pair(ta.value, tb.value) <
                         std::pair(edge.entry.bias_a.value, edge.entry.bias_b.value));
                if (better) {
                    edge.cost = cost;
                    edge.entry = detail::MergeTag{unfound, ta, tb};
                    any = true;
                }
            }
        }
        if (!any) return std::nullopt;
        return edge;
    };

    DisjointSets groups(static_cast<std::uint32_t>(d.bias_count()));
    for (const auto& edge : detail::prim_over_components<detail::MergeTag>(comp.count, best)) {
        plan.entries.push_back(
            MergeEntry{edge.entry.bias_a, edge.entry.bias_b, edge.cost});
        plan.total_cost += edge.cost;
        groups.unite(edge.entry.bias_a.value, edge.entry.bias_b.value);
    }

    std::map<std::uint32_t, std::vector<std::string>> members;
    for (std::uint32_t t = 0; t < d.bias_count(); ++t) {
        members[groups.find(t)].push_back(d.bias_name(BiasFactorId{t}));
    }
    for (const auto& [root, names] : members) {
        if (names.size() < 2) continue;
        const auto merged = merged_bias_name(names);
        for (const auto& name : names) plan.relabeling[name] = merged;
    }
    return plan;
}

// Applies the relabeling; duplicate (feature, merged bias) keys aggregate.
inline Dataset apply_merge(const Dataset& d, const MergePlan& plan) {
    if (plan.relabeling.empty()) return d;
    std::set<std::string> merged_names;
    for (const auto& [from, to] : plan.relabeling) merged_names.insert(to);
    for (const auto& name : merged_names) {
        if (d.find_bias(name) && !plan.relabeling.contains(name)) {
            throw std::invalid_argument("merged bias id '" + name +
                                        "' collides with an existing unrelated id");
        }
    }
    DatasetBuilder builder;
    for (const auto& r : d.records()) {
        const auto& bias = d.bias_name(r.bias);
        const auto it = plan.relabeling.find(bias);
        builder.add(d.feature_name(r.feature), it == plan.relabeling.end() ? bias : it->second,
                    r.clicks, r.impressions);
    }
    return builder.build();
}

}  // namespace ultr
