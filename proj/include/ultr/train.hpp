#pragma once
// Click-fitting by dual alternating minimization.
//
// Fits relevance and observation tables to observed click rates under the
// factorized click model. Each step solves the per-coordinate weighted least
// squares problem in closed form (records weighted by impression count, which
// makes the aggregated objective identical to the per-event sum), first for
// every relevance coordinate, then for every observation coordinate, clipping
// both tables to [0, 1].

#include <cstdint>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/rng.hpp"

namespace ultr {

struct ModelParams {
    std::vector<double> relevance;    // per feature index, in [0, 1]
    std::vector<double> observation;  // per bias index, in [0, 1]
};

struct TrainConfig {
    std::size_t max_steps = 20000;
    // Stop when the weighted loss decreases by less than
    // loss_tolerance * max(1, loss) between consecutive sweeps.
    double loss_tolerance = 1e-10;
    std::uint64_t seed = 1;
    // Freeze o' at 1 everywhere; fits relevance directly to raw click rates.
    bool freeze_observation = false;
};

struct FitResult {
    ModelParams params;
    std::vector<double> loss_trace;  // weighted loss after each full sweep
    std::size_t steps = 0;
    std::size_t rerandomized = 0;  // coordinates reset due to zero denominators
};

inline double predict_relevance(const ModelParams& m, FeatureId x) {
    if (x.value >= m.relevance.size()) {
        throw std::out_of_range("unknown feature index " + std::to_string(x.value));
    }
    return m.relevance[x.value];
}

inline FitResult fit(const Dataset& d, const TrainConfig& cfg) {
    if (cfg.max_steps == 0) throw std::invalid_argument("need at least one training step");
    if (d.empty()) throw std::invalid_argument("cannot fit an empty dataset");

    const auto records = d.records();
    std::vector<double> rate(records.size());
    std::vector<double> weight(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        rate[i] = records[i].click_rate();
        weight[i] = static_cast<double>(records[i].impressions);
    }

    FitResult result;
    auto& r = result.params.relevance;
    auto& o = result.params.observation;
    Rng rng(mix_seed(cfg.seed, fnv1a64("fit-init")));
    r.resize(d.feature_count());
    o.resize(d.bias_count());
    for (auto& v : r) v = rng.uniform01();
    if (cfg.freeze_observation) {
        std::fill(o.begin(), o.end(), 1.0);
    } else {
        for (auto& v : o) v = rng.uniform01();
    }

    const auto clip01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    const auto loss = [&] {
        double sum = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const double residual =
                rate[i] - r[records[i].feature.value] * o[records[i].bias.value];
            sum += weight[i] * residual * residual;
        }
        return sum;
    };

    double previous = loss();
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        for (std::uint32_t x = 0; x < r.size(); ++x) {
            double num = 0.0, den = 0.0;
            for (const auto ri : d.records_of_feature()[x]) {
                const double ot = o[records[ri].bias.value];
                num += weight[ri] * rate[ri] * ot;
                den += weight[ri] * ot * ot;
            }
            if (den == 0.0) {
                r[x] = rng.uniform01();
                ++result.rerandomized;
            } else {
                r[x] = clip01(num / den);
            }
        }
        if (!cfg.freeze_observation) {
            for (std::uint32_t t = 0; t < o.size(); ++t) {
                double num = 0.0, den = 0.0;
                for (const auto ri : d.records_of_bias()[t]) {
                    const double rx = r[records[ri].feature.value];
                    num += weight[ri] * rate[ri] * rx;
                    den += weight[ri] * rx * rx;
                }
                if (den == 0.0) {
                    o[t] = rng.uniform01();
                    ++result.rerandomized;
                } else {
                    o[t] = clip01(num / den);
                }
            }
        }
        const double current = loss();
        result.loss_trace.push_back(current);
        result.steps = step + 1;
        if (previous - current < cfg.loss_tolerance * std::max(1.0, current) &&
            current <= previous) {
            break;
        }
        previous = current;
    }
    return result;
}

}  // namespace ultr
