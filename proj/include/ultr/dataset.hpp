#pragma once
// Canonical click-log dataset model.
//
// A dataset is a bag of aggregated (feature, bias factor) observations. Both
// identifier spaces are free-form strings interned to dense indices: opaque
// keys are what real logs provide, dense indices are what the graph and
// training code needs.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ultr/rng.hpp"

namespace ultr {

struct FeatureId {
    std::uint32_t value = 0;
    friend auto operator<=>(const FeatureId&, const FeatureId&) = default;
};

struct BiasFactorId {
    std::uint32_t value = 0;
    friend auto operator<=>(const BiasFactorId&, const BiasFactorId&) = default;
};

// String <-> dense index bijection.
class Interner {
public:
    std::uint32_t intern(std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it != index_.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(names_.size());
        names_.emplace_back(name);
        index_.emplace(names_.back(), idx);
        return idx;
    }

    std::optional<std::uint32_t> find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(std::uint32_t idx) const { return names_.at(idx); }
    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct InteractionRecord {
    FeatureId feature;
    BiasFactorId bias;
    std::uint64_t clicks = 0;
    std::uint64_t impressions = 0;

    double click_rate() const {
        return static_cast<double>(clicks) / static_cast<double>(impressions);
    }
};

class DatasetBuilder;

class Dataset {
public:
    Dataset() = default;

    std::span<const InteractionRecord> records() const { return records_; }
    std::size_t feature_count() const { return features_.size(); }
    std::size_t bias_count() const { return biases_.size(); }
    bool empty() const { return records_.empty(); }

    const std::string& feature_name(FeatureId x) const { return features_.name(x.value); }
    const std::string& bias_name(BiasFactorId t) const { return biases_.name(t.value); }

    std::optional<FeatureId> find_feature(std::string_view name) const {
        auto idx = features_.find(name);
        if (!idx) return std::nullopt;
        return FeatureId{*idx};
    }
    std::optional<BiasFactorId> find_bias(std::string_view name) const {
        auto idx = biases_.find(name);
        if (!idx) return std::nullopt;
        return BiasFactorId{*idx};
    }

    // Record indices grouped by feature / bias, in record order.
    const std::vector<std::vector<std::uint32_t>>& records_of_feature() const {
        return by_feature_;
    }
    const std::vector<std::vector<std::uint32_t>>& records_of_bias() const {
        return by_bias_;
    }

    std::uint64_t total_impressions() const {
        std::uint64_t n = 0;
        for (const auto& r : records_) n += r.impressions;
        return n;
    }

    // Equality up to record order and interning order: compares the multiset
    // of (feature name, bias name, clicks, impressions) rows.
    bool same_contents(const Dataset& other) const {
        if (records_.size() != other.records_.size()) return false;
        if (feature_count() != other.feature_count()) return false;
        if (bias_count() != other.bias_count()) return false;
        return canonical_rows() == other.canonical_rows();
    }

private:
    friend class DatasetBuilder;

    using Row = std::tuple<std::string, std::string, std::uint64_t, std::uint64_t>;

    std::vector<Row> canonical_rows() const {
        std::vector<Row> rows;
        rows.reserve(records_.size());
        for (const auto& r : records_) {
            rows.emplace_back(feature_name(r.feature), bias_name(r.bias), r.clicks,
                              r.impressions);
        }
        std::sort(rows.begin(), rows.end());
        return rows;
    }

    Interner features_;
    Interner biases_;
    std::vector<InteractionRecord> records_;
    std::vector<std::vector<std::uint32_t>> by_feature_;
    std::vector<std::vector<std::uint32_t>> by_bias_;
};

// Accumulates observations, summing duplicate (feature, bias) keys.
class DatasetBuilder {
public:
    void add(std::string_view feature, std::string_view bias, std::uint64_t clicks,
             std::uint64_t impressions) {
        if (impressions == 0) {
            throw std::invalid_argument("record for (" + std::string(feature) + ", " +
                                        std::string(bias) + ") has zero impressions");
        }
        if (clicks > impressions) {
            throw std::invalid_argument("record for (" + std::string(feature) + ", " +
                                        std::string(bias) + ") has clicks > impressions");
        }
        const std::uint32_t x = dataset_.features_.intern(feature);
        const std::uint32_t t = dataset_.biases_.intern(bias);
        const std::uint64_t key = (static_cast<std::uint64_t>(x) << 32) | t;
        auto [it, inserted] = slot_.try_emplace(key, dataset_.records_.size());
        if (inserted) {
            dataset_.records_.push_back(
                InteractionRecord{FeatureId{x}, BiasFactorId{t}, clicks, impressions});
        } else {
            auto& rec = dataset_.records_[it->second];
            rec.clicks += clicks;
            rec.impressions += impressions;
        }
    }

    Dataset build() {
        dataset_.by_feature_.assign(dataset_.feature_count(), {});
        dataset_.by_bias_.assign(dataset_.bias_count(), {});
        for (std::uint32_t i = 0; i < dataset_.records_.size(); ++i) {
            const auto& r = dataset_.records_[i];
            dataset_.by_feature_[r.feature.value].push_back(i);
            dataset_.by_bias_[r.bias.value].push_back(i);
        }
        slot_.clear();
        return std::move(dataset_);
    }

private:
    Dataset dataset_;
    std::unordered_map<std::uint64_t, std::size_t> slot_;
};

// Keeps each record independently with probability `ratio`. ratio == 1
// returns the dataset unchanged; surviving records keep their identifiers,
// dropped identifiers vanish from the interning.
inline Dataset subsample(const Dataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw std::invalid_argument("subsample ratio must lie in (0, 1]");
    }
    if (ratio == 1.0) return d;
    Rng rng(mix_seed(seed, 0x5f5e100));
    DatasetBuilder builder;
    for (const auto& r : d.records()) {
        if (rng.uniform01() < ratio) {
            builder.add(d.feature_name(r.feature), d.bias_name(r.bias), r.clicks,
                        r.impressions);
        }
    }
    return builder.build();
}

}  // namespace ultr
