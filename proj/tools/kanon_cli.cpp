#include <iostream>

#include <CLI11.hpp>

#include "kanon/kanon.hpp"

namespace {

using namespace kanon;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty()) out.emplace_back(t);
    return out;
}

BackendConfig load_backend_config(const std::string& path) {
    return parse_backend_config(nlohmann::json::parse(read_file(path)));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-anonymize tabular data, audit it and augment it with generated records"};
    app.require_subcommand(1);

    // generate
    std::string profile_name, out_dir;
    std::size_t rows = 0;
    std::uint64_t seed = 0;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset profile (config, hierarchies, CSV)");
    generate->add_option("--profile", profile_name, "adult or italia")->required();
    generate->add_option("--rows", rows, "Number of rows (default: 100 for italia, 30162 for adult)");
    generate->add_option("--seed", seed, "RNG seed");
    generate->add_option("--out-dir", out_dir, "Output directory")->required();

    // sample
    std::string input, config, output;
    std::size_t count = 0;
    auto* sample = app.add_subcommand("sample", "Draw a uniform sample without replacement");
    sample->add_option("--input", input)->required();
    sample->add_option("--config", config)->required();
    sample->add_option("--count", count)->required();
    sample->add_option("--seed", seed);
    sample->add_option("--output", output)->required();

    // audit
    std::string json_out;
    auto* audit_cmd = app.add_subcommand("audit", "Report k, distinct l and the class-size histogram as JSON");
    audit_cmd->add_option("--input", input)->required();
    audit_cmd->add_option("--config", config)->required();
    audit_cmd->add_option("--output", json_out, "Write the JSON here instead of stdout");

    // anonymize
    std::string alg, meta_out;
    int k = 0;
    auto* anonymize_cmd = app.add_subcommand("anonymize", "k-anonymize a dataset with BM, TDGA or CBA");
    anonymize_cmd->add_option("--alg", alg, "bm, tdga or cba")->required();
    anonymize_cmd->add_option("--k", k)->required();
    anonymize_cmd->add_option("--seed", seed);
    anonymize_cmd->add_option("--input", input)->required();
    anonymize_cmd->add_option("--config", config)->required();
    anonymize_cmd->add_option("--output", output)->required();
    anonymize_cmd->add_option("--meta", meta_out, "Run metadata JSON (default: <output>.json)");

    // augment
    std::string backend = "synth", backend_config, policy = "strict";
    int max_attempts = 3;
    auto* augment = app.add_subcommand("augment", "Generate records for an anonymized dataset and merge them");
    augment->add_option("--input", input)->required();
    augment->add_option("--config", config)->required();
    augment->add_option("--k", k)->required();
    augment->add_option("--backend", backend, "synth or llm")->check(CLI::IsMember({"synth", "llm"}));
    augment->add_option("--backend-config", backend_config, "JSON backend config (required for llm)");
    augment->add_option("--policy", policy)->check(CLI::IsMember({"strict", "permissive"}));
    augment->add_option("--max-attempts", max_attempts);
    augment->add_option("--count", count, "Records to request (default: ceil(n/10))");
    augment->add_option("--seed", seed);
    augment->add_option("--out-dir", out_dir)->required();

    // experiment
    std::string k_grid = "default", algs = "bm,tdga,cba", backends = "synth";
    std::optional<std::size_t> sample_n;
    unsigned parallel = 1;
    bool no_datasets = false;
    auto* experiment = app.add_subcommand("experiment", "Run the k-grid over algorithms and backends");
    experiment->add_option("--input", input)->required();
    experiment->add_option("--config", config)->required();
    experiment->add_option("--k-grid", k_grid, "default or a comma list");
    experiment->add_option("--algs", algs, "Comma list of bm, tdga, cba");
    experiment->add_option("--backends", backends, "Comma list of synth, llm");
    experiment->add_option("--backend-config", backend_config, "JSON backend config for llm");
    experiment->add_option("--policy", policy)->check(CLI::IsMember({"strict", "permissive"}));
    experiment->add_option("--max-attempts", max_attempts);
    experiment->add_option("--count", count, "Records to request per augmentation (default: ceil(n/10))");
    experiment->add_option("--sample", sample_n, "Sample this many rows once before the grid");
    experiment->add_option("--seed", seed);
    experiment->add_option("--parallel", parallel);
    experiment->add_option("--out-dir", out_dir)->required();
    experiment->add_flag("--no-datasets", no_datasets, "Do not write per-cell CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            const auto profile = profiles::by_name(profile_name);
            if (rows == 0) rows = profile_name == "italia" ? 100 : 30162;
            profiles::write_profile(profile, out_dir, rows, seed);
            std::cout << "wrote " << rows << " rows to " << out_dir << "\n";
        } else if (*sample) {
            const auto cfg = load_schema_config(config);
            const auto d = load_dataset_file(input, cfg);
            write_file(output, serialize_csv(sample_records(d, count, seed)));
        } else if (*audit_cmd) {
            const auto cfg = load_schema_config(config);
            const auto d = load_dataset_file(input, cfg, CellMode::generalized);
            const auto text = to_json(audit(d)).dump(2) + "\n";
            if (json_out.empty()) std::cout << text;
            else write_file(json_out, text);
        } else if (*anonymize_cmd) {
            const auto cfg = load_schema_config(config);
            const auto d = load_dataset_file(input, cfg);
            const auto run = anonymize(d, parse_algorithm(alg), k, seed);
            write_file(output, serialize_csv(run.output));
            const auto report = audit(run.output);
            nlohmann::json meta{{"algorithm", to_string(run.algorithm)},
                                {"k", run.requested_k},
                                {"seed", run.seed},
                                {"gcp", run.gcp},
                                {"partitions", run.partitions.size()},
                                {"audit", to_json(report)},
                                {"cell", compare_cell(static_cast<std::size_t>(k), report.k).text()}};
            write_file(meta_out.empty() ? output + ".json" : meta_out, meta.dump(2) + "\n");
            std::cout << meta.dump(2) << "\n";
        } else if (*augment) {
            const auto cfg = load_schema_config(config);
            auto d = load_dataset_file(input, cfg, CellMode::generalized);
            d.provenance = Provenance::anonymized(Algorithm::bm, k);
            AugmentOptions opts{count, seed, {parse_policy_mode(policy), max_attempts}};
            MergeOutcome outcome;
            if (backend == "llm") {
                if (backend_config.empty()) throw Error("--backend llm needs --backend-config");
                RemoteLlmBackend b{load_backend_config(backend_config)};
                outcome = augment_and_merge(d, k, b, opts);
            } else {
                SynthBackend b;
                outcome = augment_and_merge(d, k, b, opts);
            }
            write_run_directory(outcome, out_dir);
            std::cout << to_json(outcome).dump(2) << "\n";
        } else if (*experiment) {
            ExperimentPlan plan;
            plan.dataset_path = input;
            plan.config_path = config;
            plan.k_values = parse_k_grid(k_grid);
            plan.algorithms.clear();
            for (const auto& a : split_list(algs)) plan.algorithms.push_back(parse_algorithm(a));
            plan.backends.clear();
            for (const auto& b : split_list(backends)) {
                if (b == "synth") {
                    plan.backends.push_back({"synth", BackendConfig{}});
                } else if (b == "llm") {
                    if (backend_config.empty()) throw Error("--backends llm needs --backend-config");
                    plan.backends.push_back({"llm", load_backend_config(backend_config)});
                } else {
                    throw Error("unknown backend '" + b + "'");
                }
            }
            plan.sample_count = sample_n;
            plan.seed = seed;
            plan.output_dir = out_dir;
            plan.policy = {parse_policy_mode(policy), max_attempts};
            plan.generation_count = count;
            plan.parallel = parallel;
            const auto result = run_experiment(plan);
            write_reports(result, plan, out_dir, !no_datasets);
            std::cout << format_table_text(result.anonymize_table) << "\n"
                      << format_table_text(result.augmented_table);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
