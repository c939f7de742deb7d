// ultr-idlab: identifiability tooling for click-log datasets.
//
// Subcommands cover the whole pipeline: connectivity checking, repair
// planning (node intervention / node merging), synthetic click simulation,
// click fitting, evaluation, closed-form probability estimates and the
// experiment harness.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ultr/dataset.hpp"
#include "ultr/harness.hpp"
#include "ultr/ig.hpp"
#include "ultr/io.hpp"
#include "ultr/kvconfig.hpp"
#include "ultr/metrics.hpp"
#include "ultr/repair.hpp"
#include "ultr/simulate.hpp"
#include "ultr/theory.hpp"
#include "ultr/train.hpp"

namespace {

using nlohmann::json;

int cmd_check(const std::string& dataset_path, bool as_json, const std::string& dot_path) {
    const auto d = ultr::load_dataset(dataset_path);
    const auto graph = ultr::build_ig(d);
    for (const auto& warning : graph.warnings) std::cerr << "warning: " << warning << '\n';
    const auto comp = ultr::components(graph, d);
    const bool identifiable = comp.count == 1;

    std::vector<std::size_t> sizes;
    for (const auto& nodes : comp.nodes) sizes.push_back(nodes.size());
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    sizes.resize(std::min<std::size_t>(sizes.size(), 3));

    if (!dot_path.empty()) {
        auto out = ultr::detail::open_output(dot_path);
        out << ultr::to_dot(graph, d);
    }

    if (as_json) {
        json j;
        j["bias_factors"] = d.bias_count();
        j["features"] = d.feature_count();
        j["records"] = d.records().size();
        j["connected_components"] = comp.count;
        j["top_component_sizes"] = sizes;
        j["identifiable"] = identifiable;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "records:              " << d.records().size() << '\n';
        std::cout << "features |X|:         " << d.feature_count() << '\n';
        std::cout << "bias factors |T|:     " << d.bias_count() << '\n';
        std::cout << "connected components: " << comp.count << '\n';
        std::cout << "top component sizes: ";
        for (const auto s : sizes) std::cout << ' ' << s;
        std::cout << '\n';
        std::cout << "identifiable:         " << (identifiable ? "yes" : "no") << '\n';
    }
    return identifiable ? 0 : 1;
}

ultr::GuessModels load_guesses(const ultr::Dataset& d, const std::string& guesses_path,
                               const std::string& bias_features_path, std::uint64_t seed) {
    if (!guesses_path.empty()) {
        const auto table = ultr::load_value_table(guesses_path);
        std::vector<double> r(d.feature_count()), o(d.bias_count());
        for (std::uint32_t x = 0; x < d.feature_count(); ++x) {
            const auto it = table.relevance.find(d.feature_name(ultr::FeatureId{x}));
            if (it == table.relevance.end()) {
                throw std::runtime_error("guess file lacks relevance for '" +
                                         d.feature_name(ultr::FeatureId{x}) + "'");
            }
            r[x] = it->second;
        }
        for (std::uint32_t t = 0; t < d.bias_count(); ++t) {
            const auto it = table.observation.find(d.bias_name(ultr::BiasFactorId{t}));
            if (it == table.observation.end()) {
                throw std::runtime_error("guess file lacks observation for '" +
                                         d.bias_name(ultr::BiasFactorId{t}) + "'");
            }
            o[t] = it->second;
        }
        return ultr::GuessModels::from_values(std::move(r), std::move(o));
    }
    if (!bias_features_path.empty()) {
        const auto bf = ultr::load_bias_features(bias_features_path);
        ultr::TrainConfig tc;
        tc.seed = seed;
        return ultr::derive_guesses(d, bf, tc);
    }
    return ultr::GuessModels::uniform(d);
}

int cmd_plan_intervene(const std::string& dataset_path, const std::string& guesses_path,
                       const std::string& bias_features_path, const std::string& strategy,
                       std::uint64_t seed, bool as_json, const std::string& out_path) {
    const auto d = ultr::load_dataset(dataset_path);
    const auto guesses = load_guesses(d, guesses_path, bias_features_path, seed);
    const auto strat = strategy == "random" ? ultr::InterventionStrategy::kRandomCost
                                            : ultr::InterventionStrategy::kMinCost;
    const auto plan = ultr::plan_intervention(d, guesses, strat, seed);

    std::ostringstream tsv;
    tsv << "# feature\ttarget_bias\tcost\n";
    char buf[48];
    for (const auto& e : plan.entries) {
        std::snprintf(buf, sizeof buf, "%.9g", e.cost);
        tsv << d.feature_name(e.feature) << '\t' << d.bias_name(e.target_bias) << '\t'
            << buf << '\n';
    }
    if (as_json) {
        json j;
        j["total_cost"] = plan.total_cost;
        j["entries"] = json::array();
        for (const auto& e : plan.entries) {
            j["entries"].push_back({{"feature", d.feature_name(e.feature)},
                                    {"target_bias", d.bias_name(e.target_bias)},
                                    {"cost", e.cost}});
        }
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << tsv.str();
    }
    if (!out_path.empty()) ultr::detail::open_output(out_path) << tsv.str();
    return 0;
}

void print_warnings(const std::vector<std::string>& warnings, std::size_t limit = 8) {
    for (std::size_t i = 0; i < warnings.size() && i < limit; ++i) {
        std::cerr << "warning: " << warnings[i] << '\n';
    }
    if (warnings.size() > limit) {
        std::cerr << "warning: ... and " << warnings.size() - limit << " more\n";
    }
}

int cmd_plan_merge(const std::string& dataset_path, const std::string& bias_features_path,
                   bool as_json, const std::string& out_path) {
    const auto d = ultr::load_dataset(dataset_path);
    std::vector<std::string> warnings;
    const auto bf = ultr::load_bias_features(bias_features_path, &d, &warnings);
    print_warnings(warnings);
    const auto plan = ultr::plan_merge(d, bf);

    std::ostringstream tsv;
    tsv << "# bias_a\tbias_b\tcost\n";
    char buf[48];
    for (const auto& e : plan.entries) {
        std::snprintf(buf, sizeof buf, "%.9g", e.cost);
        tsv << d.bias_name(e.bias_a) << '\t' << d.bias_name(e.bias_b) << '\t' << buf << '\n';
    }
    if (as_json) {
        json j;
        j["total_cost"] = plan.total_cost;
        j["entries"] = json::array();
        for (const auto& e : plan.entries) {
            j["entries"].push_back({{"bias_a", d.bias_name(e.bias_a)},
                                    {"bias_b", d.bias_name(e.bias_b)},
                                    {"cost", e.cost}});
        }
        j["relabeling"] = plan.relabeling;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << tsv.str();
    }
    if (!out_path.empty()) ultr::detail::open_output(out_path) << tsv.str();
    return 0;
}

ultr::SimulationConfig simulation_config_from(const ultr::KvConfig& kv) {
    ultr::SimulationConfig cfg;
    cfg.n_documents = kv.get_u64("n_documents", cfg.n_documents);
    cfg.n_queries = kv.get_u64("n_queries", cfg.n_queries);
    cfg.list_size = kv.get_u64("list_size", cfg.list_size);
    cfg.relevance_levels = kv.get_u64("relevance_levels", cfg.relevance_levels);
    cfg.noise = kv.get_double("noise", cfg.noise);
    cfg.observation_curve = kv.get_doubles("observation_curve");
    cfg.target_components = kv.get_u64("target_components", cfg.target_components);
    for (const auto b : kv.get_u64s("block_sizes")) cfg.block_sizes.push_back(b);
    cfg.total_clicks = kv.get_u64("total_clicks", cfg.total_clicks);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    if (kv.has("cpbm_context_count")) {
        ultr::CpbmConfig cpbm;
        cpbm.context_count = kv.get_u64("cpbm_context_count", 0);
        cpbm.context_std = kv.get_double("cpbm_context_std", cpbm.context_std);
        cpbm.weights = kv.get_doubles("cpbm_weights");
        cfg.cpbm = cpbm;
    }
    return cfg;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = simulation_config_from(ultr::KvConfig::parse_file(config_path));
    const auto data = ultr::generate_synthetic(cfg);
    const auto clicked = ultr::sample_clicks(data.dataset, data.truth, cfg.total_clicks,
                                             ultr::mix_seed(cfg.seed, ultr::fnv1a64("clicks")));

    std::filesystem::create_directories(out_dir);
    ultr::save_dataset(out_dir + "/dataset.tsv", clicked);
    ultr::save_bias_features(out_dir + "/bias_features.tsv", data.bias_features);
    ultr::ValueTable truth;
    truth.relevance = data.truth.relevance;
    truth.observation = data.truth.observation;
    ultr::save_value_table(out_dir + "/ground_truth.tsv", truth);
    ultr::QuerySet qs;
    for (std::size_t q = 0; q < data.truth.queries.size(); ++q) {
        std::vector<ultr::QueryDoc> docs;
        for (const auto& doc : data.truth.queries[q]) {
            docs.push_back(ultr::QueryDoc{doc.feature, doc.level});
        }
        qs.queries.push_back({"q" + std::to_string(q), std::move(docs)});
    }
    ultr::save_queries(out_dir + "/queries.tsv", qs);
    std::cout << "wrote dataset.tsv, bias_features.tsv, ground_truth.tsv, queries.tsv to "
              << out_dir << '\n';
    return 0;
}

int cmd_train(const std::string& dataset_path, std::size_t steps, std::uint64_t seed,
              bool freeze_observation, const std::string& out_path) {
    const auto d = ultr::load_dataset(dataset_path);
    ultr::TrainConfig cfg;
    cfg.max_steps = steps;
    cfg.seed = seed;
    cfg.freeze_observation = freeze_observation;
    const auto result = ultr::fit(d, cfg);

    ultr::ValueTable table;
    table.relevance = ultr::relevance_by_name(d, result.params);
    table.observation = ultr::observation_by_name(d, result.params);
    ultr::save_value_table(out_path, table);
    std::cout << "steps: " << result.steps << '\n';
    std::cout << "final loss: " << result.loss_trace.back() << '\n';
    if (result.rerandomized > 0) {
        std::cout << "re-randomized coordinates: " << result.rerandomized << '\n';
    }
    std::cout << "model written to " << out_path << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& truth_path,
             const std::string& queries_path, const std::string& out_path) {
    const auto model = ultr::load_value_table(model_path);
    const auto truth = ultr::load_value_table(truth_path);
    const auto queries = ultr::load_queries(queries_path);

    const auto predicted = [&](const std::string& feature) {
        const auto it = model.relevance.find(feature);
        if (it == model.relevance.end()) {
            throw std::runtime_error("model has no relevance for '" + feature + "'");
        }
        return it->second;
    };
    const auto actual = [&](const std::string& feature) {
        const auto it = truth.relevance.find(feature);
        if (it == truth.relevance.end()) {
            throw std::runtime_error("ground truth has no relevance for '" + feature + "'");
        }
        return it->second;
    };

    std::vector<double> true_r, pred_r;
    std::vector<ultr::RankedQuery> ranked;
    std::map<std::string, std::uint32_t> tie_ids;
    for (const auto& [qid, docs] : queries.queries) {
        ultr::RankedQuery rq;
        for (const auto& doc : docs) {
            true_r.push_back(actual(doc.feature));
            pred_r.push_back(predicted(doc.feature));
            rq.levels.push_back(doc.level);
            rq.scores.push_back(predicted(doc.feature));
            rq.tie_ids.push_back(
                tie_ids.try_emplace(doc.feature, static_cast<std::uint32_t>(tie_ids.size()))
                    .first->second);
        }
        ranked.push_back(std::move(rq));
    }
    const auto report = ultr::evaluate(true_r, pred_r, ranked, ultr::kDefaultNdcgCutoffs);

    json j;
    j["mcc"] = report.mcc;
    for (const auto& [k, v] : report.ndcg) j["ndcg@" + std::to_string(k)] = v;
    std::cout << j.dump(2) << '\n';
    if (!out_path.empty()) ultr::detail::open_output(out_path) << j.dump(2) << '\n';
    return 0;
}

int cmd_estimate_prob(std::uint64_t d, std::uint64_t x, std::uint64_t t, std::size_t trials,
                      std::uint64_t seed) {
    json j;
    j["d"] = d;
    j["x"] = x;
    j["t"] = t;
    j["identifiability_probability"] = ultr::identifiability_probability(d, x, t);
    j["pair_disconnection_probability"] = ultr::disconnection_probability(d, x, t);
    if (trials > 0) {
        j["mc_identifiable_frequency"] = ultr::mc_identifiable_frequency(d, x, t, trials, seed);
        j["mc_trials"] = trials;
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

ultr::ExperimentSpec experiment_spec_from(const ultr::KvConfig& kv) {
    ultr::ExperimentSpec spec;
    spec.scenario = ultr::scenario_from_name(kv.get_string("scenario", "table1_repair"));
    spec.repeats = kv.get_u64("repeats", spec.repeats);
    spec.click_budgets = kv.get_u64s("budgets");
    spec.seed = kv.get_u64("seed", spec.seed);
    spec.n_documents = kv.get_u64("n_documents", spec.n_documents);
    spec.n_queries = kv.get_u64("n_queries", spec.n_queries);
    spec.list_size = kv.get_u64("list_size", spec.list_size);
    spec.relevance_levels = kv.get_u64("relevance_levels", spec.relevance_levels);
    spec.noise = kv.get_double("noise", spec.noise);
    spec.target_components = kv.get_u64("target_components", spec.target_components);
    for (const auto b : kv.get_u64s("block_sizes")) spec.block_sizes.push_back(b);
    spec.dataset_path = kv.get_string("dataset", "");
    spec.ratios = kv.get_doubles("ratios");
    spec.trials = kv.get_u64("trials", spec.trials);
    spec.grid_tsizes = kv.get_u64s("grid_t");
    spec.grid_xsizes = kv.get_u64s("grid_x");
    spec.grid_d_per_t = kv.get_u64("grid_d_per_t", spec.grid_d_per_t);
    spec.grid_trials = kv.get_u64("grid_trials", spec.grid_trials);
    return spec;
}

int cmd_run(const std::string& spec_path, const std::string& out_dir) {
    auto spec = experiment_spec_from(ultr::KvConfig::parse_file(spec_path));
    spec.out_dir = out_dir;
    const auto result = ultr::run_experiment(spec);
    std::cout << "scenario:    " << result.scenario << '\n';
    std::cout << "config hash: " << result.config_hash << '\n';
    for (const auto& cell : result.cells) {
        std::printf("%-28s budget=%-9llu MCC %.3f ±%.3f  nDCG@10 %.3f ±%.3f\n",
                    cell.condition.c_str(), static_cast<unsigned long long>(cell.budget),
                    cell.mcc.mean, cell.mcc.stddev, cell.ndcg.at(10).mean,
                    cell.ndcg.at(10).stddev);
    }
    for (const auto& row : result.prob_grid) {
        std::printf("d=%-6llu x=%-6llu t=%-4llu closed=%.3f mc=%.3f\n",
                    static_cast<unsigned long long>(row.dsize),
                    static_cast<unsigned long long>(row.xsize),
                    static_cast<unsigned long long>(row.tsize), row.closed_form,
                    row.frequency);
    }
    for (const auto& row : result.sampling) {
        std::printf("ratio=%.2f connected=%.3f\n", row.ratio, row.connected_fraction);
    }
    for (const auto& failure : result.failures) {
        std::cerr << "FAILED: " << failure << '\n';
    }
    if (!out_dir.empty()) std::cout << "results written to " << out_dir << '\n';
    return result.failed() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"identifiability checking, dataset repair and experiments for click logs"};
    app.require_subcommand(1);

    std::string dataset_path, guesses_path, bias_features_path, out_path, dot_path;
    std::string config_path, out_dir, model_path, truth_path, queries_path, spec_path;
    std::string strategy = "min";
    bool as_json = false, freeze_observation = false, list_scenarios = false;
    std::uint64_t seed = 1, prob_d = 1, prob_x = 1, prob_t = 1;
    std::size_t steps = 20000, trials = 0;

    auto* check = app.add_subcommand("check", "test identifiability of a dataset");
    check->add_option("dataset", dataset_path)->required();
    check->add_flag("--json", as_json, "machine-readable output");
    check->add_option("--dot", dot_path, "write the IG as DOT text");

    auto* intervene = app.add_subcommand("plan-intervene", "plan a minimal node intervention");
    intervene->add_option("dataset", dataset_path)->required();
    intervene->add_option("--guesses", guesses_path, "r/o guess table (value-table TSV)");
    intervene->add_option("--bias-features", bias_features_path,
                          "derive guesses via node merging + training");
    intervene->add_option("--strategy", strategy)->check(CLI::IsMember({"min", "random"}));
    intervene->add_option("--seed", seed);
    intervene->add_flag("--json", as_json);
    intervene->add_option("--out", out_path, "also write the plan as TSV");

    auto* merge = app.add_subcommand("plan-merge", "plan a minimal node merging");
    merge->add_option("dataset", dataset_path)->required();
    merge->add_option("--bias-features", bias_features_path)->required();
    merge->add_flag("--json", as_json);
    merge->add_option("--out", out_path);

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic click log");
    simulate->add_option("--config", config_path)->required();
    simulate->add_option("--out", out_dir)->required();

    auto* train = app.add_subcommand("train", "fit relevance/observation tables to clicks");
    train->add_option("dataset", dataset_path)->required();
    train->add_option("--steps", steps);
    train->add_option("--seed", seed);
    train->add_flag("--freeze-observation", freeze_observation,
                    "no-debias baseline: o' frozen at 1");
    train->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "score a trained model against ground truth");
    eval->add_option("--model", model_path)->required();
    eval->add_option("--truth", truth_path)->required();
    eval->add_option("--queries", queries_path)->required();
    eval->add_option("--out", out_path);

    auto* prob = app.add_subcommand("estimate-prob", "closed-form identifiability probability");
    prob->add_option("--d", prob_d)->required();
    prob->add_option("--x", prob_x)->required();
    prob->add_option("--t", prob_t)->required();
    prob->add_option("--simulate", trials, "also run a Monte-Carlo check");
    prob->add_option("--seed", seed);

    auto* run = app.add_subcommand("run", "run an experiment scenario");
    run->add_option("--spec", spec_path);
    run->add_option("--out", out_dir);
    run->add_flag("--list-scenarios", list_scenarios);

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) return cmd_check(dataset_path, as_json, dot_path);
        if (intervene->parsed()) {
            return cmd_plan_intervene(dataset_path, guesses_path, bias_features_path,
                                      strategy, seed, as_json, out_path);
        }
        if (merge->parsed()) return cmd_plan_merge(dataset_path, bias_features_path, as_json, out_path);
        if (simulate->parsed()) return cmd_simulate(config_path, out_dir);
        if (train->parsed()) {
            return cmd_train(dataset_path, steps, seed, freeze_observation, out_path);
        }
        if (eval->parsed()) return cmd_eval(model_path, truth_path, queries_path, out_path);
        if (prob->parsed()) return cmd_estimate_prob(prob_d, prob_x, prob_t, trials, seed);
        if (run->parsed()) {
            if (list_scenarios) {
                for (const auto& [name, s] : ultr::scenario_catalog()) std::cout << name << '\n';
                return 0;
            }
            if (spec_path.empty()) {
                std::cerr << "error: --spec is required (or use --list-scenarios)\n";
                return 1;
            }
            return cmd_run(spec_path, out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
