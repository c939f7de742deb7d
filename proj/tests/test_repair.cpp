#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracle.hpp"
#include "ultr/repair.hpp"
#include "ultr/simulate.hpp"

namespace {

ultr::Dataset pairs(const std::vector<std::pair<std::string, std::string>>& rows) {
    ultr::DatasetBuilder builder;
    for (const auto& [x, t] : rows) builder.add(x, t, 0, 1);
    return builder.build();
}

ultr::BiasFeatureTable scalar_features(const ultr::Dataset& d,
                                       const std::map<std::string, double>& values) {
    ultr::BiasFeatureTable bf;
    bf.dimension = 1;
    for (const auto& [name, v] : values) bf.rows[name] = {v};
    (void)d;
    return bf;
}

// Re-applies an intervention plan as bare records and re-checks connectivity.
ultr::Dataset augment(const ultr::Dataset& d, const ultr::InterventionPlan& plan) {
    ultr::DatasetBuilder builder;
    for (const auto& rec : d.records()) {
        builder.add(d.feature_name(rec.feature), d.bias_name(rec.bias), rec.clicks,
                    rec.impressions);
    }
    for (const auto& e : plan.entries) {
        builder.add(d.feature_name(e.feature), d.bias_name(e.target_bias), 0, 1);
    }
    return builder.build();
}

}  // namespace

TEST_CASE("intervention cost follows the variance proxy") {
    const auto d = pairs({{"x", "t1"}, {"y", "t2"}});
    const auto x = *d.find_feature("x");
    const auto t1 = *d.find_bias("t1");
    const auto t2 = *d.find_bias("t2");

    SUBCASE("perfect observation floors the cost at zero") {
        const auto g = ultr::GuessModels::uniform(d, 1.0);
        CHECK(ultr::intervention_cost(x, t1, t2, g) == doctest::Approx(0.0));
    }
    SUBCASE("hand-computed value") {
        auto g = ultr::GuessModels::from_values({0.5, 0.5}, {0.5, 0.25});
        // 1/(0.5*0.5) + 1/(0.5*0.25) - 2 = 4 + 8 - 2
        CHECK(ultr::intervention_cost(x, t1, t2, g) == doctest::Approx(10.0));
    }
    SUBCASE("symmetric in the two bias factors") {
        auto g = ultr::GuessModels::from_values({0.7, 0.7}, {0.9, 0.3});
        CHECK(ultr::intervention_cost(x, t1, t2, g) ==
              doctest::Approx(ultr::intervention_cost(x, t2, t1, g)));
    }
}

TEST_CASE("guess values are floored and must be positive") {
    const auto g = ultr::GuessModels::from_values({0.0}, {-1.0});
    CHECK(g.relevance(ultr::FeatureId{0}) == doctest::Approx(ultr::GuessModels::kGuessFloor));
    CHECK(g.observation(ultr::BiasFactorId{0}) ==
          doctest::Approx(ultr::GuessModels::kGuessFloor));
    CHECK_THROWS_AS(g.relevance(ultr::FeatureId{5}), std::out_of_range);
}

TEST_CASE("predicted swap variance scales as 1/(N R) times the cost") {
    const auto d = pairs({{"x", "t1"}, {"x", "t2"}});
    const auto x = *d.find_feature("x");
    const auto t1 = *d.find_bias("t1");
    const auto t2 = *d.find_bias("t2");
    auto g = ultr::GuessModels::from_values({0.5}, {0.5, 0.25});

    CHECK(ultr::predicted_swap_variance(x, t1, t2, g, 10000, 1.0) == doctest::Approx(1e-3));
    const auto perfect = ultr::GuessModels::uniform(d, 1.0);
    CHECK(ultr::predicted_swap_variance(x, t1, t2, perfect, 123, 1.0) == doctest::Approx(0.0));
    CHECK(ultr::predicted_swap_variance(x, t1, t2, g, 20000, 1.0) ==
          doctest::Approx(0.5 * ultr::predicted_swap_variance(x, t1, t2, g, 10000, 1.0)));
    CHECK_THROWS_AS(ultr::predicted_swap_variance(x, t1, t2, g, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ultr::predicted_swap_variance(x, t1, t2, g, 10, 0.0), std::invalid_argument);
}

TEST_CASE("a connected dataset needs no intervention") {
    const auto d = pairs({{"x", "t1"}, {"x", "t2"}});
    const auto plan = ultr::plan_intervention(d, ultr::GuessModels::uniform(d),
                                              ultr::InterventionStrategy::kMinCost, 1);
    CHECK(plan.entries.empty());
    CHECK(plan.total_cost == doctest::Approx(0.0));
}

TEST_CASE("a single cross candidate is chosen when it is the only option") {
    // Component A = {t1} with lone feature xa; component B = {t2}.
    const auto d = pairs({{"xa", "t1"}, {"xb", "t2"}});
    const auto plan = ultr::plan_intervention(d, ultr::GuessModels::uniform(d),
                                              ultr::InterventionStrategy::kMinCost, 1);
    REQUIRE(plan.entries.size() == 1);
    // Uniform guesses tie both directions; the unfound-component direction wins,
    // swapping xb (component 1) into t1.
    CHECK(d.feature_name(plan.entries[0].feature) == "xb");
    CHECK(d.bias_name(plan.entries[0].target_bias) == "t1");
    CHECK(ultr::is_identifiable(augment(d, plan)).identifiable);
}

TEST_CASE("the cheapest swap wins") {
    // Component 0 = {t1} with features xr (high relevance) and xp (low);
    // component 1 = {t2}. The cost picks the high-relevance feature.
    const auto d = pairs({{"xr", "t1"}, {"xp", "t1"}, {"xb", "t2"}});
    auto g = ultr::GuessModels::from_values({0.9, 0.1, 0.1}, {0.8, 0.8});
    const auto plan =
        ultr::plan_intervention(d, g, ultr::InterventionStrategy::kMinCost, 1);
    REQUIRE(plan.entries.size() == 1);
    CHECK(d.feature_name(plan.entries[0].feature) == "xr");
    CHECK(d.bias_name(plan.entries[0].target_bias) == "t2");
    CHECK(plan.total_cost ==
          doctest::Approx(1.0 / (0.9 * 0.8) + 1.0 / (0.9 * 0.8) - 2.0));
}

TEST_CASE("equal costs break ties toward the smallest feature index") {
    // xa and xb share the cost of bridging t1 -> t2; xa was interned first.
    const auto d = pairs({{"xa", "t1"}, {"xb", "t1"}, {"xc", "t2"}});
    auto g = ultr::GuessModels::from_values({0.9, 0.9, 0.1}, {0.8, 0.8});
    const auto plan =
        ultr::plan_intervention(d, g, ultr::InterventionStrategy::kMinCost, 1);
    REQUIRE(plan.entries.size() == 1);
    CHECK(d.feature_name(plan.entries[0].feature) == "xa");
    CHECK(d.bias_name(plan.entries[0].target_bias) == "t2");
}

TEST_CASE("plans have K-1 entries and restore connectivity") {
    for (const std::size_t k : {2u, 3u, 4u}) {
        ultr::SimulationConfig cfg;
        cfg.n_documents = 40;
        cfg.n_queries = 30;
        cfg.target_components = k;
        cfg.seed = 100 + k;
        const auto data = ultr::generate_synthetic(cfg);
        const auto d = data.dataset;
        REQUIRE(ultr::is_identifiable(d).decomposition.count == k);

        for (const auto strategy : {ultr::InterventionStrategy::kMinCost,
                                    ultr::InterventionStrategy::kRandomCost}) {
            const auto plan =
                ultr::plan_intervention(d, ultr::GuessModels::uniform(d), strategy, 5);
            CHECK(plan.entries.size() == k - 1);
            CHECK(ultr::is_identifiable(augment(d, plan)).identifiable);
        }
    }
}

TEST_CASE("random-cost planning is deterministic per seed") {
    ultr::SimulationConfig cfg;
    cfg.n_documents = 30;
    cfg.n_queries = 20;
    cfg.target_components = 3;
    cfg.seed = 9;
    const auto d = ultr::generate_synthetic(cfg).dataset;
    const auto g = ultr::GuessModels::uniform(d);
    const auto a = ultr::plan_intervention(d, g, ultr::InterventionStrategy::kRandomCost, 33);
    const auto b = ultr::plan_intervention(d, g, ultr::InterventionStrategy::kRandomCost, 33);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].feature == b.entries[i].feature);
        CHECK(a.entries[i].target_bias == b.entries[i].target_bias);
    }
}

TEST_CASE("intervention total cost equals the brute-force MST cost") {
    ultr::Rng rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        const auto k = 2 + rng.below(4);  // up to 5 components
        ultr::DatasetBuilder builder;
        // Component c holds biases tc_0, tc_1 chained by features fc_*.
        for (std::size_t c = 0; c < k; ++c) {
            const auto t0 = "t" + std::to_string(c) + "_0";
            const auto t1 = "t" + std::to_string(c) + "_1";
            const auto chain = "f" + std::to_string(c);
            builder.add(chain, t0, 0, 1);
            builder.add(chain, t1, 0, 1);
            builder.add("g" + std::to_string(c), t1, 0, 1);
        }
        const auto d = builder.build();
        std::vector<double> r(d.feature_count()), o(d.bias_count());
        for (auto& v : r) v = 0.1 + 0.9 * rng.uniform01();
        for (auto& v : o) v = 0.1 + 0.9 * rng.uniform01();
        const auto g = ultr::GuessModels::from_values(r, o);

        const auto comp = ultr::components(ultr::build_ig(d), d);
        REQUIRE(comp.count == k);

        // Independent pairwise costs: min over both directions of the swap cost.
        std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a + 1; b < k; ++b) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& [from, to] :
                     {std::pair(a, b), std::pair(b, a)}) {
                    for (const auto ts : comp.nodes[from]) {
                        for (const auto ri : d.records_of_bias()[ts.value]) {
                            const auto x = d.records()[ri].feature;
                            for (const auto td : comp.nodes[to]) {
                                best = std::min(best, ultr::intervention_cost(x, ts, td, g));
                            }
                        }
                    }
                }
                cost[a][b] = cost[b][a] = best;
            }
        }
        const auto plan =
            ultr::plan_intervention(d, g, ultr::InterventionStrategy::kMinCost, 1);
        CHECK(plan.total_cost ==
              doctest::Approx(oracle::brute_force_mst_cost(cost)).epsilon(1e-9));
    }
}

TEST_CASE("merging cost is the Euclidean distance between bias features") {
    const auto d = pairs({{"x1", "t1"}, {"x2", "t2"}});
    const auto bf = scalar_features(d, {});
    ultr::BiasFeatureTable table;
    table.dimension = 2;
    table.rows["t1"] = {0.0, 0.0};
    table.rows["t2"] = {3.0, 4.0};
    CHECK(ultr::merging_cost(*d.find_bias("t1"), *d.find_bias("t2"), d, table) ==
          doctest::Approx(5.0));
    table.rows["t2"] = {0.0, 0.0};
    CHECK(ultr::merging_cost(*d.find_bias("t1"), *d.find_bias("t2"), d, table) ==
          doctest::Approx(0.0));

    SUBCASE("adjacent ranks as scalar features are one apart") {
        const auto dp = pairs({{"x1", "p3"}, {"x2", "p4"}});
        const auto ranks = scalar_features(dp, {{"p3", 3.0}, {"p4", 4.0}});
        CHECK(ultr::merging_cost(*dp.find_bias("p3"), *dp.find_bias("p4"), dp, ranks) ==
              doctest::Approx(1.0));
    }
    SUBCASE("missing entries and dimension mismatches are errors") {
        ultr::BiasFeatureTable broken;
        broken.dimension = 2;
        broken.rows["t1"] = {0.0, 0.0};
        broken.rows["t2"] = {1.0};
        CHECK_THROWS(ultr::merging_cost(*d.find_bias("t1"), *d.find_bias("t2"), d, broken));
        ultr::BiasFeatureTable missing;
        missing.rows["t1"] = {0.0};
        CHECK_THROWS_AS(
            ultr::merging_cost(*d.find_bias("t1"), *d.find_bias("t2"), d, missing),
            std::out_of_range);
    }
}

TEST_CASE("a connected dataset needs no merging") {
    const auto d = pairs({{"x", "t1"}, {"x", "t2"}});
    const auto plan = ultr::plan_merge(d, scalar_features(d, {{"t1", 1.0}, {"t2", 2.0}}));
    CHECK(plan.entries.empty());
    CHECK(plan.relabeling.empty());
}

TEST_CASE("merging connects the closest cross-component pair") {
    // Components {p1,p2,p3} and {p4} with rank features: merge (p3, p4).
    const auto d = pairs({{"a", "p1"}, {"a", "p2"}, {"a", "p3"}, {"b", "p4"}});
    const auto bf =
        scalar_features(d, {{"p1", 1.0}, {"p2", 2.0}, {"p3", 3.0}, {"p4", 4.0}});
    const auto plan = ultr::plan_merge(d, bf);
    REQUIRE(plan.entries.size() == 1);
    CHECK(d.bias_name(plan.entries[0].bias_b) == "p3");
    CHECK(d.bias_name(plan.entries[0].bias_a) == "p4");
    CHECK(plan.entries[0].cost == doctest::Approx(1.0));
    CHECK(plan.relabeling.at("p3") == "merge(p3,p4)");
    CHECK(plan.relabeling.at("p4") == "merge(p3,p4)");
}

TEST_CASE("three singleton components merge along the MST") {
    const auto d = pairs({{"x1", "ta"}, {"x2", "tb"}, {"x3", "tc"}});
    const auto bf = scalar_features(d, {{"ta", 0.0}, {"tb", 10.0}, {"tc", 11.0}});
    const auto plan = ultr::plan_merge(d, bf);
    REQUIRE(plan.entries.size() == 2);
    // Brute force over the three spanning trees gives 11 = (10,11) + (0,10).
    CHECK(plan.total_cost == doctest::Approx(11.0));
    std::set<std::set<std::string>> merged;
    for (const auto& e : plan.entries) {
        merged.insert({d.bias_name(e.bias_a), d.bias_name(e.bias_b)});
    }
    CHECK(merged == std::set<std::set<std::string>>{{"ta", "tb"}, {"tb", "tc"}});
}

TEST_CASE("merge total cost equals the brute-force MST cost on random instances") {
    ultr::Rng rng(808);
    for (int trial = 0; trial < 10; ++trial) {
        const auto k = 2 + rng.below(5);  // up to 6 components
        ultr::DatasetBuilder builder;
        ultr::BiasFeatureTable bf;
        bf.dimension = 2;
        for (std::size_t c = 0; c < k; ++c) {
            for (int j = 0; j < 2; ++j) {
                const auto t = "t" + std::to_string(c) + "_" + std::to_string(j);
                builder.add("f" + std::to_string(c), t, 0, 1);
                bf.rows[t] = {10.0 * rng.uniform01(), 10.0 * rng.uniform01()};
            }
        }
        const auto d = builder.build();
        const auto comp = ultr::components(ultr::build_ig(d), d);
        REQUIRE(comp.count == k);

        std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a + 1; b < k; ++b) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto ta : comp.nodes[a]) {
                    for (const auto tb : comp.nodes[b]) {
                        best = std::min(best, ultr::merging_cost(ta, tb, d, bf));
                    }
                }
                cost[a][b] = cost[b][a] = best;
            }
        }
        const auto plan = ultr::plan_merge(d, bf);
        CHECK(plan.entries.size() == k - 1);
        CHECK(plan.total_cost ==
              doctest::Approx(oracle::brute_force_mst_cost(cost)).epsilon(1e-9));
    }
}

TEST_CASE("applying an empty merge plan is the identity") {
    const auto d = pairs({{"x", "t1"}, {"x", "t2"}});
    CHECK(ultr::apply_merge(d, ultr::MergePlan{}).same_contents(d));
}

TEST_CASE("merged bias ids collapse to one node and aggregate records") {
    const auto d = pairs({{"x1", "t2"}, {"x1", "t3"}, {"x2", "t3"}});
    ultr::MergePlan plan;
    plan.entries.push_back(ultr::MergeEntry{*d.find_bias("t2"), *d.find_bias("t3"), 0.0});
    plan.relabeling["t2"] = "merge(t2,t3)";
    plan.relabeling["t3"] = "merge(t2,t3)";
    const auto merged = ultr::apply_merge(d, plan);
    CHECK(merged.bias_count() == 1);
    CHECK(merged.find_bias("merge(t2,t3)").has_value());
    REQUIRE(merged.records().size() == 2);  // (x1, merged) aggregated
    CHECK(merged.records()[0].impressions == 2);
}

TEST_CASE("relabel collisions with unrelated ids are rejected") {
    const auto d = pairs({{"x1", "t1"}, {"x2", "t2"}, {"x3", "merge(t1,t2)"}});
    ultr::MergePlan plan;
    plan.entries.push_back(ultr::MergeEntry{*d.find_bias("t1"), *d.find_bias("t2"), 0.0});
    plan.relabeling["t1"] = "merge(t1,t2)";
    plan.relabeling["t2"] = "merge(t1,t2)";
    CHECK_THROWS_AS(ultr::apply_merge(d, plan), std::invalid_argument);
}

TEST_CASE("merge planning copes with hundreds of components") {
    ultr::DatasetBuilder builder;
    ultr::BiasFeatureTable bf;
    bf.dimension = 1;
    ultr::Rng rng(31337);
    const std::size_t k = 800;
    for (std::size_t c = 0; c < k; ++c) {
        const auto t = "t" + std::to_string(c);
        builder.add("f" + std::to_string(c), t, 0, 1);
        bf.rows[t] = {1000.0 * rng.uniform01()};
    }
    const auto d = builder.build();
    const auto plan = ultr::plan_merge(d, bf);
    CHECK(plan.entries.size() == k - 1);
    CHECK(ultr::is_identifiable(ultr::apply_merge(d, plan)).identifiable);
}

TEST_CASE("merging makes every synthetic dataset identifiable") {
    for (const std::size_t k : {2u, 3u, 4u}) {
        ultr::SimulationConfig cfg;
        cfg.n_documents = 40;
        cfg.n_queries = 30;
        cfg.target_components = k;
        cfg.seed = 200 + k;
        const auto data = ultr::generate_synthetic(cfg);
        const auto plan = ultr::plan_merge(data.dataset, data.bias_features);
        CHECK(plan.entries.size() == k - 1);
        const auto merged = ultr::apply_merge(data.dataset, plan);
        CHECK(ultr::is_identifiable(merged).identifiable);
        CHECK(merged.bias_count() == data.dataset.bias_count() - (k - 1));
    }
}
