#pragma once
// Fully synthetic click-log generation.
//
// Documents are one-hot (one feature per document) and bias factors are
// display positions, optionally crossed with a context type (CPBM). The
// position range is split into contiguous blocks and each block draws from a
// disjoint document pool, so the identifiability graph has exactly the
// requested number of connected components.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/ig.hpp"
#include "ultr/io.hpp"
#include "ultr/repair.hpp"
#include "ultr/rng.hpp"

namespace ultr {

struct CpbmConfig {
    std::size_t context_count = 0;
    double context_std = 0.35;          // per-element std of the context vectors
    std::vector<double> weights;        // w; its length fixes the vector dimension
};

struct SimulationConfig {
    std::size_t n_documents = 10000;
    std::size_t n_queries = 1150;
    std::size_t list_size = 10;
    std::size_t relevance_levels = 5;   // levels 0 .. y_max with y_max = levels - 1
    double noise = 0.1;                 // click noise epsilon
    std::vector<double> observation_curve;  // o(p) per position; default 1/p
    std::optional<CpbmConfig> cpbm;
    std::size_t target_components = 1;  // K
    std::vector<std::size_t> block_sizes;  // optional explicit position blocks
    std::uint64_t total_clicks = 1000000;  // interaction budget for sampling
    std::uint64_t seed = 1;

    std::vector<double> curve() const {
        if (!observation_curve.empty()) return observation_curve;
        std::vector<double> c(list_size);
        for (std::size_t p = 0; p < list_size; ++p) c[p] = 1.0 / static_cast<double>(p + 1);
        return c;
    }

    std::vector<std::size_t> blocks() const {
        if (!block_sizes.empty()) return block_sizes;
        std::vector<std::size_t> b(target_components, list_size / target_components);
        for (std::size_t i = 0; i < list_size % target_components; ++i) ++b[i];
        return b;
    }

    void validate() const {
        if (n_documents == 0 || n_queries == 0 || list_size == 0) {
            throw std::invalid_argument("document, query and list sizes must be positive");
        }
        if (relevance_levels < 1) throw std::invalid_argument("need at least one relevance level");
        if (!(noise >= 0.0) || noise >= 1.0) throw std::invalid_argument("noise must lie in [0, 1)");
        if (target_components < 1 || target_components > list_size) {
            throw std::invalid_argument("target component count must lie in [1, list_size]");
        }
        const auto c = curve();
        if (c.size() != list_size) {
            throw std::invalid_argument("observation curve must have one value per position");
        }
        for (const double o : c) {
            if (!(o > 0.0) || o > 1.0) {
                throw std::invalid_argument("observation probabilities must lie in (0, 1]");
            }
        }
        const auto b = blocks();
        if (b.size() != target_components) {
            throw std::invalid_argument("block count must equal the target component count");
        }
        std::size_t total = 0;
        for (const auto s : b) {
            if (s == 0) throw std::invalid_argument("position blocks must be non-empty");
            total += s;
        }
        if (total != list_size) {
            throw std::invalid_argument("position blocks must partition the result list");
        }
        if (cpbm) {
            if (cpbm->context_count == 0) {
                throw std::invalid_argument("CPBM requires at least one context type");
            }
            if (cpbm->weights.empty()) {
                throw std::invalid_argument("CPBM requires a non-empty weight vector");
            }
        }
    }
};

// Relevance probability for a graded judgment: eps + (1-eps)(2^y - 1)/(2^ymax - 1).
inline double relevance_from_level(int level, int y_max, double eps) {
    if (level < 0 || level > y_max) {
        throw std::invalid_argument("relevance level out of range");
    }
    if (y_max == 0) return 1.0;
    const double numer = std::exp2(level) - 1.0;
    const double denom = std::exp2(y_max) - 1.0;
    return eps + (1.0 - eps) * numer / denom;
}

// Context vectors and the exponent they induce on the position curve.
class CpbmModel {
public:
    explicit CpbmModel(const SimulationConfig& cfg) : cfg_(cfg) {
        if (!cfg.cpbm) throw std::invalid_argument("CPBM is not enabled in this config");
        Rng rng(mix_seed(cfg.seed, fnv1a64("cpbm-contexts")));
        const auto& c = *cfg.cpbm;
        vectors_.resize(c.context_count, std::vector<double>(c.weights.size()));
        for (auto& vec : vectors_) {
            for (auto& v : vec) v = rng.gaussian(0.0, c.context_std);
        }
        curve_ = cfg.curve();
    }

    const std::vector<double>& context_vector(std::size_t context) const {
        if (context >= vectors_.size()) throw std::out_of_range("unknown context id");
        return vectors_[context];
    }

    double exponent(std::size_t context) const {
        const auto& vec = context_vector(context);
        const auto& w = cfg_.cpbm->weights;
        double dot = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * vec[i];
        return std::max(dot + 1.0, 0.0);
    }

    // o(p)^max(w.X_t + 1, 0); positions are 1-based.
    double observation(std::size_t position, std::size_t context) const {
        if (position == 0 || position > curve_.size()) {
            throw std::out_of_range("position outside the result list");
        }
        return std::pow(curve_[position - 1], exponent(context));
    }

private:
    SimulationConfig cfg_;
    std::vector<std::vector<double>> vectors_;
    std::vector<double> curve_;
};

inline double cpbm_observation(std::size_t position, std::size_t context,
                               const SimulationConfig& cfg) {
    return CpbmModel(cfg).observation(position, context);
}

struct GroundTruth {
    std::map<std::string, double> relevance;    // feature name -> r
    std::map<std::string, double> observation;  // bias name -> o

    struct DisplayedDoc {
        std::string feature;
        int level = 0;
        std::size_t position = 0;  // 1-based
        std::string bias;
    };
    std::vector<std::vector<DisplayedDoc>> queries;

    double r(const std::string& feature) const {
        const auto it = relevance.find(feature);
        if (it == relevance.end()) throw std::out_of_range("unknown feature '" + feature + "'");
        return it->second;
    }
    double o(const std::string& bias) const {
        const auto it = observation.find(bias);
        if (it == observation.end()) throw std::out_of_range("unknown bias factor '" + bias + "'");
        return it->second;
    }
};

struct SyntheticData {
    Dataset dataset;  // impressions are display counts; clicks are zero
    GroundTruth truth;
    BiasFeatureTable bias_features;
};

namespace detail {

inline std::string position_name(std::size_t position) {
    return "p" + std::to_string(position);
}

inline std::string bias_factor_name(std::size_t position, std::optional<std::size_t> context) {
    return context ? position_name(position) + "|c" + std::to_string(*context)
                   : position_name(position);
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SimulationConfig& cfg) {
    cfg.validate();
    const auto blocks = cfg.blocks();
    const auto curve = cfg.curve();
    const int y_max = static_cast<int>(cfg.relevance_levels) - 1;

    // Document pools sized proportionally to the position blocks.
    std::vector<std::size_t> pool_size(blocks.size());
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        pool_size[b] = cfg.n_documents * blocks[b] / cfg.list_size;
        assigned += pool_size[b];
    }
    for (std::size_t b = 0; assigned < cfg.n_documents; ++b, ++assigned) {
        ++pool_size[b % blocks.size()];
    }
    std::vector<std::size_t> pool_start(blocks.size());
    for (std::size_t b = 1; b < blocks.size(); ++b) {
        pool_start[b] = pool_start[b - 1] + pool_size[b - 1];
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (pool_size[b] < blocks[b]) {
            throw std::invalid_argument("document pool smaller than its position block");
        }
    }

    Rng rng(mix_seed(cfg.seed, fnv1a64("generate")));
    SyntheticData out;

    std::vector<int> level(cfg.n_documents);
    for (auto& y : level) y = static_cast<int>(rng.below(cfg.relevance_levels));

    std::optional<CpbmModel> cpbm;
    if (cfg.cpbm) cpbm.emplace(cfg);

    const auto doc_name = [](std::size_t doc) { return "d" + std::to_string(doc); };
    const auto record_observation = [&](std::size_t position, const std::string& bias,
                                        std::optional<std::size_t> context) {
        if (!out.truth.observation.contains(bias)) {
            out.truth.observation[bias] =
                context ? cpbm->observation(position, *context) : curve[position - 1];
            auto& row = out.bias_features.rows[bias];
            if (context) {
                row = cpbm->context_vector(*context);
                row.push_back(10.0 * static_cast<double>(position));
            } else {
                row = {static_cast<double>(position)};
            }
            out.bias_features.dimension = row.size();
        }
    };

    DatasetBuilder builder;
    std::vector<std::size_t> chosen;
    for (std::size_t q = 0; q < cfg.n_queries; ++q) {
        out.truth.queries.emplace_back();
        auto& query = out.truth.queries.back();
        std::size_t position = 1;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            chosen.clear();
            while (chosen.size() < blocks[b]) {
                const std::size_t doc = pool_start[b] + rng.below(pool_size[b]);
                if (std::find(chosen.begin(), chosen.end(), doc) == chosen.end()) {
                    chosen.push_back(doc);
                }
            }
            for (const std::size_t doc : chosen) {
                std::optional<std::size_t> context;
                if (cfg.cpbm) context = rng.below(cfg.cpbm->context_count);
                const auto bias = detail::bias_factor_name(position, context);
                record_observation(position, bias, context);
                builder.add(doc_name(doc), bias, 0, 1);
                query.push_back(GroundTruth::DisplayedDoc{doc_name(doc), level[doc],
                                                          position, bias});
                ++position;
            }
        }
    }

    // One anchor document per block ties the block's positions into a single
    // IG component regardless of how the random draws landed. Under CPBM the
    // anchor pins context 0 at each position.
    std::vector<std::size_t> block_of_position(cfg.list_size + 1, 0);
    std::size_t position = 1;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto anchor = doc_name(pool_start[b]);
        for (std::size_t i = 0; i < blocks[b]; ++i, ++position) {
            block_of_position[position] = b;
            std::optional<std::size_t> context;
            if (cfg.cpbm) context = 0;
            const auto bias = detail::bias_factor_name(position, context);
            record_observation(position, bias, context);
            builder.add(anchor, bias, 0, 1);
        }
    }

    for (std::size_t doc = 0; doc < cfg.n_documents; ++doc) {
        out.truth.relevance[doc_name(doc)] = relevance_from_level(level[doc], y_max, cfg.noise);
    }
    out.dataset = builder.build();

    // Contextual bias nodes can still fragment a block (a (position, context)
    // pair seen by a single document has no second co-occurrence). Stitch each
    // stray sub-component to its block anchor and rebuild.
    auto decomposition = components(build_ig(out.dataset), out.dataset);
    if (decomposition.count > cfg.target_components) {
        const auto position_of = [&](const std::string& bias) {
            const auto end = bias.find('|');
            return static_cast<std::size_t>(
                std::stoul(bias.substr(1, end == std::string::npos ? end : end - 1)));
        };
        std::vector<std::uint32_t> anchor_component(blocks.size());
        position = 1;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            std::optional<std::size_t> context;
            if (cfg.cpbm) context = 0;
            const auto bias = out.dataset.find_bias(detail::bias_factor_name(position, context));
            anchor_component[b] = decomposition.component_of[bias->value];
            position += blocks[b];
        }
        DatasetBuilder stitched;
        for (const auto& rec : out.dataset.records()) {
            stitched.add(out.dataset.feature_name(rec.feature),
                         out.dataset.bias_name(rec.bias), rec.clicks, rec.impressions);
        }
        std::set<std::uint32_t> handled;
        for (std::uint32_t t = 0; t < out.dataset.bias_count(); ++t) {
            const auto& bias = out.dataset.bias_name(BiasFactorId{t});
            const auto b = block_of_position[position_of(bias)];
            const auto comp = decomposition.component_of[t];
            if (comp != anchor_component[b] && handled.insert(comp).second) {
                stitched.add(doc_name(pool_start[b]), bias, 0, 1);
            }
        }
        out.dataset = stitched.build();
        decomposition = components(build_ig(out.dataset), out.dataset);
    }
    if (decomposition.count != cfg.target_components) {
        throw std::runtime_error("generated IG has " + std::to_string(decomposition.count) +
                                 " components, expected " +
                                 std::to_string(cfg.target_components));
    }
    return out;
}

// Spreads the interaction budget uniformly over display events and samples
// clicks per record at rate r(x) * o(t). Per-record seeds derive from the
// record identity, so results do not depend on evaluation order.
inline Dataset sample_clicks(const Dataset& d, const GroundTruth& truth,
                             std::uint64_t total_clicks, std::uint64_t seed) {
    if (total_clicks == 0) throw std::invalid_argument("interaction budget must be >= 1");
    const double total_events = static_cast<double>(d.total_impressions());
    DatasetBuilder builder;
    for (const auto& rec : d.records()) {
        const auto& feature = d.feature_name(rec.feature);
        const auto& bias = d.bias_name(rec.bias);
        const double share = static_cast<double>(total_clicks) *
                             static_cast<double>(rec.impressions) / total_events;
        const auto impressions = std::max<std::uint64_t>(1, std::llround(share));
        Rng rng(mix_seed(seed, fnv1a64(feature), fnv1a64(bias)));
        const auto clicks = rng.binomial(impressions, truth.r(feature) * truth.o(bias));
        builder.add(feature, bias, clicks, impressions);
    }
    return builder.build();
}

// Materializes an intervention plan: each swap becomes a new record holding
// `clicks_per_swap` impressions with clicks sampled at the true rate.
inline Dataset apply_intervention(const Dataset& d, const InterventionPlan& plan,
                                  const GroundTruth& truth, std::uint64_t clicks_per_swap,
                                  std::uint64_t seed) {
    if (clicks_per_swap == 0) throw std::invalid_argument("swap budget must be >= 1");
    DatasetBuilder builder;
    for (const auto& rec : d.records()) {
        builder.add(d.feature_name(rec.feature), d.bias_name(rec.bias), rec.clicks,
                    rec.impressions);
    }
    for (const auto& entry : plan.entries) {
        if (entry.feature.value >= d.feature_count() ||
            entry.target_bias.value >= d.bias_count()) {
            throw std::out_of_range("intervention plan references ids outside the dataset");
        }
        const auto& feature = d.feature_name(entry.feature);
        const auto& bias = d.bias_name(entry.target_bias);
        Rng rng(mix_seed(seed, fnv1a64(feature), fnv1a64(bias), 0x11));
        const auto clicks = rng.binomial(clicks_per_swap, truth.r(feature) * truth.o(bias));
        builder.add(feature, bias, clicks, clicks_per_swap);
    }
    return builder.build();
}

}  // namespace ultr
