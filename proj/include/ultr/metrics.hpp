#pragma once
// Ranking evaluation: Pearson correlation between true and predicted
// relevance (MCC in the ULTR sense, not the classification coefficient) and
// nDCG@k with 2^y - 1 gains and log2(rank + 1) discounts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ultr {

struct EvalReport {
    double mcc = 0.0;
    std::map<int, double> ndcg;  // k -> mean nDCG@k
};

// Pearson correlation over paired relevance values. Constant sequences are an
// error: a degenerate fit must not masquerade as zero correlation.
inline double mcc(std::span<const double> true_r, std::span<const double> pred_r) {
    if (true_r.size() != pred_r.size()) {
        throw std::invalid_argument("MCC inputs must have equal length");
    }
    if (true_r.size() < 2) throw std::invalid_argument("MCC needs at least two pairs");
    const auto n = static_cast<double>(true_r.size());
    const double mean_a = std::accumulate(true_r.begin(), true_r.end(), 0.0) / n;
    const double mean_b = std::accumulate(pred_r.begin(), pred_r.end(), 0.0) / n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < true_r.size(); ++i) {
        const double da = true_r[i] - mean_a;
        const double db = pred_r[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw std::invalid_argument("MCC is undefined for a constant sequence");
    }
    return cov / std::sqrt(var_a * var_b);
}

struct RankedQuery {
    std::vector<int> levels;           // graded judgments per document
    std::vector<double> scores;        // predicted scores per document
    std::vector<std::uint32_t> tie_ids;  // tie-break ids (feature indices); optional
};

namespace detail {

inline double dcg_at_k(const std::vector<int>& levels_in_rank_order, std::size_t k) {
    double dcg = 0.0;
    const std::size_t limit = std::min(k, levels_in_rank_order.size());
    for (std::size_t rank = 0; rank < limit; ++rank) {
        const double gain = std::exp2(levels_in_rank_order[rank]) - 1.0;
        dcg += gain / std::log2(static_cast<double>(rank) + 2.0);
    }
    return dcg;
}

}  // namespace detail

// Mean over queries of DCG@k(predicted order) / DCG@k(ideal order). Score
// ties break on ascending tie id. Queries whose ideal DCG is zero carry no
// ranking signal and are skipped.
inline double ndcg_at_k(std::span<const RankedQuery> queries, std::size_t k) {
    if (k < 1) throw std::invalid_argument("nDCG cutoff must be >= 1");
    if (queries.empty()) throw std::invalid_argument("nDCG needs at least one query");
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& q : queries) {
        if (q.levels.empty() || q.levels.size() != q.scores.size()) {
            throw std::invalid_argument("query has mismatched levels and scores");
        }
        std::vector<std::size_t> order(q.levels.size());
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (q.scores[a] != q.scores[b]) return q.scores[a] > q.scores[b];
            const auto ta = q.tie_ids.empty() ? a : q.tie_ids[a];
            const auto tb = q.tie_ids.empty() ? b : q.tie_ids[b];
            return ta < tb;
        });
        std::vector<int> predicted(q.levels.size());
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            predicted[rank] = q.levels[order[rank]];
        }
        std::vector<int> ideal = q.levels;
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        const double idcg = detail::dcg_at_k(ideal, k);
        if (idcg <= 0.0) continue;
        total += detail::dcg_at_k(predicted, k) / idcg;
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("every query had zero ideal DCG");
    return total / static_cast<double>(counted);
}

inline EvalReport evaluate(std::span<const double> true_r, std::span<const double> pred_r,
                           std::span<const RankedQuery> queries,
                           std::span<const int> cutoffs) {
    EvalReport report;
    report.mcc = mcc(true_r, pred_r);
    for (const int k : cutoffs) {
        report.ndcg[k] = ndcg_at_k(queries, static_cast<std::size_t>(k));
    }
    return report;
}

inline constexpr std::array<int, 4> kDefaultNdcgCutoffs{1, 3, 5, 10};

}  // namespace ultr
