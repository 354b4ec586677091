#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/anonymizers.hpp"
#include "kanon/audit.hpp"
#include "kanon/pipeline.hpp"

namespace kanon {

/// 2, then 5 to 100 in steps of 5.
inline std::vector<int> default_k_grid() {
    std::vector<int> grid{2};
    for (int k = 5; k <= 100; k += 5) grid.push_back(k);
    return grid;
}

inline std::vector<int> parse_k_grid(std::string_view spec) {
    if (spec == "default") return default_k_grid();
    std::vector<int> grid;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const auto token = trim(spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        auto v = parse_number(token);
        if (!v || *v != std::trunc(*v)) throw Error("k grid: '" + std::string(token) + "' is not an integer");
        grid.push_back(static_cast<int>(*v));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return grid;
}

struct BackendSpec {
    std::string name; // column label: "synth" or "llm"
    BackendConfig config;
};

struct ExperimentPlan {
    std::filesystem::path dataset_path;
    std::filesystem::path config_path;
    std::vector<int> k_values = default_k_grid();
    std::vector<Algorithm> algorithms{Algorithm::bm, Algorithm::tdga, Algorithm::cba};
    std::vector<BackendSpec> backends{{"synth", BackendConfig{}}};
    std::optional<std::size_t> sample_count;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    ValidationPolicy policy;
    std::size_t generation_count = 0; // 0 picks ceil(n / 10)
    unsigned parallel = 1;

    void validate() const {
        if (k_values.empty()) throw Error("experiment plan: empty k grid");
        for (std::size_t i = 0; i < k_values.size(); ++i) {
            if (k_values[i] < 2) throw Error("experiment plan: every k must be >= 2");
            if (i && k_values[i] <= k_values[i - 1]) throw Error("experiment plan: k grid must be strictly increasing");
        }
        if (algorithms.empty()) throw Error("experiment plan: no algorithms");
    }
};

struct ExperimentTable {
    std::string title;
    std::vector<int> k_values;
    std::vector<std::string> columns;
    std::map<std::pair<int, std::string>, ReportCell> cells;

    const ReportCell& at(int k, const std::string& column) const { return cells.at({k, column}); }
};

/// Measurements of one (k, algorithm) grid cell.
struct CellRecord {
    int k = 0;
    Algorithm algorithm = Algorithm::bm;
    ReportCell anonymize_cell;
    std::optional<std::size_t> measured_k;
    std::optional<std::size_t> l_distinct;
    std::optional<std::size_t> class_count;
    std::optional<double> gcp;
    double anonymize_seconds = 0.0;
    std::optional<Dataset> anonymized;
    struct Augmented {
        std::string backend;
        ReportCell cell;
        std::optional<std::size_t> pre_k, post_k, accepted, rejected;
        int attempts = 0;
        double seconds = 0.0;
        std::optional<Dataset> merged;
    };
    std::vector<Augmented> augmented;
};

struct ExperimentResult {
    ExperimentTable anonymize_table;
    ExperimentTable augmented_table;
    std::vector<CellRecord> cells;
    std::size_t n = 0;
};

inline std::string augmented_column(Algorithm a, const std::string& backend) { return to_string(a) + "/" + backend; }

namespace detail {

inline ReportCell skipped_cell(const std::string& why) { return {ReportCell::Kind::skipped, 0, why}; }
inline ReportCell failed_cell(const std::string& why) { return {ReportCell::Kind::failed, 0, why}; }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline CellRecord run_cell(const Dataset& data, int k, Algorithm alg, const ExperimentPlan& plan) {
    CellRecord rec;
    rec.k = k;
    rec.algorithm = alg;
    auto mark_augmented = [&](const ReportCell& cell) {
        for (const auto& b : plan.backends) rec.augmented.push_back({b.name, cell, {}, {}, {}, {}, 0, 0.0, {}});
    };
    if (static_cast<std::size_t>(k) > data.n()) {
        rec.anonymize_cell = skipped_cell("k exceeds n");
        mark_augmented(rec.anonymize_cell);
        return rec;
    }
    try {
        const auto t0 = std::chrono::steady_clock::now();
        auto run = anonymize(data, alg, k, plan.seed);
        rec.anonymize_seconds = seconds_since(t0);
        const auto report = audit(run.output);
        rec.measured_k = report.k;
        rec.l_distinct = report.l_distinct;
        rec.class_count = report.class_count;
        rec.gcp = run.gcp;
        rec.anonymize_cell = compare_cell(static_cast<std::size_t>(k), report.k);
        rec.anonymized = std::move(run.output);
    } catch (const std::exception& e) {
        rec.anonymize_cell = failed_cell(e.what());
        mark_augmented(failed_cell("anonymization failed"));
        return rec;
    }

    for (const auto& b : plan.backends) {
        CellRecord::Augmented aug{b.name, {}, {}, {}, {}, {}, 0, 0.0, {}};
        try {
            AugmentOptions opts{plan.generation_count, plan.seed, plan.policy};
            const auto t0 = std::chrono::steady_clock::now();
            MergeOutcome outcome;
            if (b.config.kind == BackendConfig::Kind::remote_llm) {
                RemoteLlmBackend backend{b.config};
                outcome = augment_and_merge(*rec.anonymized, k, backend, opts);
            } else {
                SynthBackend backend;
                opts.seed = plan.seed ^ b.config.seed;
                outcome = augment_and_merge(*rec.anonymized, k, backend, opts);
            }
            aug.seconds = seconds_since(t0);
            aug.cell = outcome.cell;
            aug.pre_k = outcome.pre_k;
            aug.post_k = outcome.post_k;
            aug.accepted = outcome.accepted_records;
            aug.rejected = outcome.rejected_records;
            aug.attempts = outcome.attempts;
            aug.merged = std::move(outcome.merged);
        } catch (const std::exception& e) {
            aug.cell = failed_cell(e.what());
        }
        rec.augmented.push_back(std::move(aug));
    }
    return rec;
}

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace detail

/// Runs every (k, algorithm) cell on one dataset, sampled once up front when
/// the plan asks for it. Cells are independent and may run in parallel.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, const Dataset& loaded) {
    plan.validate();
    Dataset data = loaded;
    if (plan.sample_count) data = sample_records(loaded, *plan.sample_count, plan.seed);

    struct Job {
        int k;
        Algorithm alg;
    };
    std::vector<Job> jobs;
    for (int k : plan.k_values)
        for (Algorithm a : plan.algorithms) jobs.push_back({k, a});

    std::vector<CellRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) records[i] = detail::run_cell(data, jobs[i].k, jobs[i].alg, plan);
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(plan.parallel, static_cast<unsigned>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    ExperimentResult result;
    result.n = data.n();
    result.anonymize_table.title = "anonymity level";
    result.augmented_table.title = "anonymity level after augmentation";
    result.anonymize_table.k_values = result.augmented_table.k_values = plan.k_values;
    for (Algorithm a : plan.algorithms) {
        result.anonymize_table.columns.push_back(to_string(a));
        for (const auto& b : plan.backends) result.augmented_table.columns.push_back(augmented_column(a, b.name));
    }
    for (const auto& rec : records) {
        result.anonymize_table.cells[{rec.k, to_string(rec.algorithm)}] = rec.anonymize_cell;
        for (const auto& aug : rec.augmented)
            result.augmented_table.cells[{rec.k, augmented_column(rec.algorithm, aug.backend)}] = aug.cell;
    }
    result.cells = std::move(records);
    return result;
}

inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
    const auto cfg = load_schema_config(plan.config_path);
    return run_experiment(plan, load_dataset_file(plan.dataset_path, cfg));
}

/// Aligned text in the "=", ">(v)", "<(v)" notation.
inline std::string format_table_text(const ExperimentTable& t) {
    std::size_t width = 6;
    for (const auto& c : t.columns) width = std::max(width, c.size() + 2);
    for (const auto& [key, cell] : t.cells) width = std::max(width, cell.text().size() + 2);
    std::string out = detail::pad("k", 6);
    for (const auto& c : t.columns) out += detail::pad(c, width);
    while (out.back() == ' ') out.pop_back();
    out += "\n";
    for (int k : t.k_values) {
        std::string line = detail::pad(std::to_string(k), 6);
        for (const auto& c : t.columns) line += detail::pad(t.at(k, c).text(), width);
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

inline std::string format_table_csv(const ExperimentTable& t) {
    std::vector<csv::Row> rows;
    csv::Row header{"k"};
    header.insert(header.end(), t.columns.begin(), t.columns.end());
    rows.push_back(header);
    for (int k : t.k_values) {
        csv::Row row{std::to_string(k)};
        for (const auto& c : t.columns) row.push_back(t.at(k, c).text());
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

/// Everything measured, without timings (those live in the metadata file).
inline nlohmann::json results_json(const ExperimentResult& r, const ExperimentPlan& plan) {
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        nlohmann::json augmented = nlohmann::json::array();
        for (const auto& a : c.augmented)
            augmented.push_back({{"backend", a.backend}, {"cell", a.cell.text()}, {"pre_k", opt(a.pre_k)},
                                 {"post_k", opt(a.post_k)}, {"accepted", opt(a.accepted)},
                                 {"rejected", opt(a.rejected)}, {"attempts", a.attempts}});
        cells.push_back({{"k", c.k}, {"algorithm", to_string(c.algorithm)}, {"cell", c.anonymize_cell.text()},
                         {"measured_k", opt(c.measured_k)}, {"l_distinct", opt(c.l_distinct)},
                         {"class_count", opt(c.class_count)}, {"gcp", opt(c.gcp)}, {"augmented", augmented}});
    }
    std::vector<std::string> algs, backends;
    for (auto a : plan.algorithms) algs.push_back(to_string(a));
    for (const auto& b : plan.backends) backends.push_back(b.name);
    return {{"n", r.n},
            {"seed", plan.seed},
            {"sample_count", opt(plan.sample_count)},
            {"k_values", plan.k_values},
            {"algorithms", algs},
            {"backends", backends},
            {"policy", plan.policy.mode == ValidationPolicy::Mode::strict ? "strict" : "permissive"},
            {"max_attempts", plan.policy.max_attempts},
            {"cells", cells}};
}

inline nlohmann::json metadata_json(const ExperimentResult& r) {
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& c : r.cells) {
        nlohmann::json aug = nlohmann::json::object();
        for (const auto& a : c.augmented) aug[a.backend] = a.seconds;
        timings.push_back({{"k", c.k}, {"algorithm", to_string(c.algorithm)}, {"anonymize_seconds", c.anonymize_seconds},
                           {"augment_seconds", aug}});
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    return {{"generated_at", ts.str()}, {"timings", timings}};
}

/// Writes the two tables (text and CSV), results.json and metadata.json.
/// With `keep_datasets`, every anonymized and merged CSV is written too.
inline void write_reports(const ExperimentResult& r, const ExperimentPlan& plan, const std::filesystem::path& dir,
                          bool keep_datasets = true) {
    std::filesystem::create_directories(dir);
    write_file(dir / "anonymize_table.txt", format_table_text(r.anonymize_table));
    write_file(dir / "anonymize_table.csv", format_table_csv(r.anonymize_table));
    write_file(dir / "augmented_table.txt", format_table_text(r.augmented_table));
    write_file(dir / "augmented_table.csv", format_table_csv(r.augmented_table));
    write_file(dir / "results.json", results_json(r, plan).dump(2) + "\n");
    write_file(dir / "metadata.json", metadata_json(r).dump(2) + "\n");
    if (!keep_datasets) return;
    for (const auto& c : r.cells) {
        const auto stem = to_string(c.algorithm) + "_k" + std::to_string(c.k);
        if (c.anonymized) write_file(dir / "datasets" / (stem + ".csv"), serialize_csv(*c.anonymized));
        for (const auto& a : c.augmented)
            if (a.merged) write_file(dir / "datasets" / (stem + "_" + a.backend + "_merged.csv"), serialize_csv(*a.merged));
    }
}

} // namespace kanon
