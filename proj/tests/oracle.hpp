#pragma once
// Test-only oracles, kept independent of the library's algorithmic paths.
//
//  * identifiable_by_nullspace: Gaussian elimination on the log-linear click
//    system; identifiability means the homogeneous solution space is exactly
//    the one-dimensional global-scaling direction.
//  * brute_force_mst_cost: minimum spanning tree weight by enumerating every
//    labeled tree through Prüfer sequences (viable for <= 6 nodes).
//  * make_noise_free_dataset: exact-rational click rates so "perfect fit"
//    assertions are not limited by integer click counts.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/rng.hpp"

namespace oracle {

// Rank of a 0/1 matrix via Gaussian elimination with partial pivoting.
inline std::size_t matrix_rank(std::vector<std::vector<double>> m) {
    if (m.empty()) return 0;
    const std::size_t rows = m.size(), cols = m[0].size();
    std::size_t rank = 0;
    for (std::size_t col = 0; col < cols && rank < rows; ++col) {
        std::size_t pivot = rank;
        for (std::size_t r = rank + 1; r < rows; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        if (std::abs(m[pivot][col]) < 1e-9) continue;
        std::swap(m[rank], m[pivot]);
        for (std::size_t r = 0; r < rows; ++r) {
            if (r == rank || std::abs(m[r][col]) < 1e-12) continue;
            const double factor = m[r][col] / m[rank][col];
            for (std::size_t c = col; c < cols; ++c) m[r][c] -= factor * m[rank][c];
        }
        ++rank;
    }
    return rank;
}

// Builds the log-domain system log r'(x) + log o'(t) = log c, one row per
// record, and checks that its null space has dimension exactly one.
inline bool identifiable_by_nullspace(const ultr::Dataset& d) {
    const std::size_t cols = d.feature_count() + d.bias_count();
    std::vector<std::vector<double>> m;
    for (const auto& rec : d.records()) {
        std::vector<double> row(cols, 0.0);
        row[rec.feature.value] = 1.0;
        row[d.feature_count() + rec.bias.value] = 1.0;
        m.push_back(std::move(row));
    }
    const std::size_t null_dim = cols - matrix_rank(std::move(m));
    return null_dim == 1;
}

// Decodes a Prüfer sequence into tree edges over nodes 0..n-1.
inline std::vector<std::pair<std::size_t, std::size_t>> prufer_decode(
    const std::vector<std::size_t>& seq, std::size_t n) {
    std::vector<std::size_t> degree(n, 1);
    for (const auto v : seq) ++degree[v];
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<bool> used(n, false);
    std::vector<std::size_t> seq_copy = seq;
    for (const auto v : seq_copy) {
        std::size_t leaf = 0;
        while (leaf < n && (degree[leaf] != 1 || used[leaf])) ++leaf;
        edges.emplace_back(leaf, v);
        used[leaf] = true;
        --degree[v];
        --degree[leaf];
    }
    std::vector<std::size_t> rest;
    for (std::size_t v = 0; v < n; ++v) {
        if (!used[v] && degree[v] == 1) rest.push_back(v);
    }
    edges.emplace_back(rest[0], rest[1]);
    return edges;
}

// Minimum total weight over all spanning trees of the complete graph with the
// given symmetric cost matrix.
inline double brute_force_mst_cost(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n <= 1) return 0.0;
    if (n == 2) return cost[0][1];
    std::vector<std::size_t> seq(n - 2, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double total = 0.0;
        for (const auto& [a, b] : prufer_decode(seq, n)) total += cost[a][b];
        best = std::min(best, total);
        std::size_t pos = 0;
        while (pos < seq.size() && seq[pos] + 1 == n) seq[pos++] = 0;
        if (pos == seq.size()) break;
        ++seq[pos];
    }
    return best;
}

// Relevance probabilities for the five graded levels at noise 0.1 as exact
// fractions k/50, so rates r * (1/p) are exactly n_clicks / n_impressions.
inline std::uint64_t level_numerator_50(int level) {
    switch (level) {
        case 0: return 5;
        case 1: return 8;
        case 2: return 14;
        case 3: return 26;
        case 4: return 50;
    }
    throw std::invalid_argument("level out of range");
}

struct NoiseFreeSpec {
    std::string doc;
    std::size_t position = 1;  // observation 1/position
    int level = 0;
};

inline ultr::Dataset make_noise_free_dataset(const std::vector<NoiseFreeSpec>& rows,
                                             std::uint64_t scale = 1000) {
    ultr::DatasetBuilder builder;
    for (const auto& row : rows) {
        const auto impressions = 50 * row.position * scale;
        const auto clicks = oracle::level_numerator_50(row.level) * scale;
        builder.add(row.doc, "p" + std::to_string(row.position), clicks, impressions);
    }
    return builder.build();
}

inline double level_relevance(int level) {
    return static_cast<double>(level_numerator_50(level)) / 50.0;
}

// Uniform random small dataset over x0..x{nx-1} / t0..t{nt-1}.
inline ultr::Dataset random_small_dataset(std::size_t nx, std::size_t nt,
                                          std::size_t n_pairs, ultr::Rng& rng) {
    ultr::DatasetBuilder builder;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        builder.add("x" + std::to_string(rng.below(nx)), "t" + std::to_string(rng.below(nt)),
                    0, 1);
    }
    return builder.build();
}

}  // namespace oracle
