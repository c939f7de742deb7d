#pragma once
// Closed-form estimates for identifiability under random dataset generation,
// plus the merging error bound, and Monte-Carlo counterparts used to validate
// them. The estimates are asymptotic in |X||T|; evaluation stays in the log
// domain so large datasets do not overflow.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "ultr/dataset.hpp"
#include "ultr/ig.hpp"
#include "ultr/rng.hpp"

namespace ultr {

namespace detail {

// log(2 - exp(-u)) evaluated stably for tiny u.
inline double log_two_minus_exp(double u) { return std::log1p(-std::expm1(-u)); }

}  // namespace detail

// Estimated probability that a dataset of `dsize` uniform i.i.d. pairs over
// `xsize` features and `tsize` bias factors yields a connected IG:
//   1 - |T| exp(-|D| + f),  f = |X||T| log(2 - exp(-|D| / (|X||T|))).
// Clamped to [0, 1].
inline double identifiability_probability(std::uint64_t dsize, std::uint64_t xsize,
                                          std::uint64_t tsize) {
    if (xsize == 0 || tsize == 0) throw std::invalid_argument("|X| and |T| must be >= 1");
    const double d = static_cast<double>(dsize);
    const double xt = static_cast<double>(xsize) * static_cast<double>(tsize);
    const double f = xt * detail::log_two_minus_exp(d / xt);
    const double log_term = std::log(static_cast<double>(tsize)) - d + f;
    if (log_term >= 0.0) return 0.0;
    return 1.0 - std::exp(log_term);
}

// Estimated probability that two fixed bias factors share no witness feature:
//   exp(-|D|/|T|) [2 - exp(-|D| / (|X||T|))]^{|X|}.
inline double disconnection_probability(std::uint64_t dsize, std::uint64_t xsize,
                                        std::uint64_t tsize) {
    if (xsize == 0 || tsize == 0) throw std::invalid_argument("|X| and |T| must be >= 1");
    const double d = static_cast<double>(dsize);
    const double x = static_cast<double>(xsize);
    const double t = static_cast<double>(tsize);
    const double log_p = -d / t + x * detail::log_two_minus_exp(d / (x * t));
    return std::exp(std::min(log_p, 0.0));
}

// Worst-case relevance-ratio spread after forcing two observation parameters
// together: |o(t') - o(t'')| / |o'(t')|.
inline double merging_error_bound(double o_t1, double o_t2, double o_merged) {
    if (o_merged == 0.0) throw std::invalid_argument("merged observation must be non-zero");
    return std::abs(o_t1 - o_t2) / std::abs(o_merged);
}

// One draw of the random-dataset model: `dsize` (feature, bias) pairs uniform
// i.i.d.; duplicates collapse.
inline Dataset random_uniform_dataset(std::uint64_t dsize, std::uint64_t xsize,
                                      std::uint64_t tsize, Rng& rng) {
    DatasetBuilder builder;
    for (std::uint64_t i = 0; i < dsize; ++i) {
        const auto x = rng.below(xsize);
        const auto t = rng.below(tsize);
        builder.add("x" + std::to_string(x), "t" + std::to_string(t), 0, 1);
    }
    return builder.build();
}

// Monte-Carlo frequency of a connected IG under the random-dataset model.
// Bias factors that a draw never samples are absent from the interning and
// therefore from the graph: connectivity is over the seen nodes, matching
// is_identifiable on the drawn dataset. An empty draw counts as disconnected.
inline double mc_identifiable_frequency(std::uint64_t dsize, std::uint64_t xsize,
                                        std::uint64_t tsize, std::size_t trials,
                                        std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("need at least one trial");
    std::size_t connected = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, fnv1a64("prob-grid"), trial));
        const auto d = random_uniform_dataset(dsize, xsize, tsize, rng);
        if (!d.empty() && is_identifiable(d).identifiable) ++connected;
    }
    return static_cast<double>(connected) / static_cast<double>(trials);
}

// Monte-Carlo frequency that two fixed bias factors end up with no shared
// feature (no direct IG edge), matching what disconnection_probability
// estimates.
inline double mc_pair_unlinked_frequency(std::uint64_t dsize, std::uint64_t xsize,
                                         std::uint64_t tsize, std::size_t trials,
                                         std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("need at least one trial");
    if (tsize < 2) throw std::invalid_argument("need at least two bias factors");
    std::size_t unlinked = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, fnv1a64("pair-link"), trial));
        const auto d = random_uniform_dataset(dsize, xsize, tsize, rng);
        const auto s = d.find_bias("t0");
        const auto t = d.find_bias("t1");
        if (!s || !t) {
            ++unlinked;
            continue;
        }
        bool linked = false;
        for (const auto& edge : build_ig(d).edges) {
            if ((edge.a == *s && edge.b == *t) || (edge.a == *t && edge.b == *s)) {
                linked = true;
                break;
            }
        }
        if (!linked) ++unlinked;
    }
    return static_cast<double>(unlinked) / static_cast<double>(trials);
}

}  // namespace ultr
