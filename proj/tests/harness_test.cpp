#include <gtest/gtest.h>

#include "test_util.hpp"

namespace kanon {
namespace {

const std::filesystem::path kItalia = KANON_TEST_DATA_DIR "/italia";

ExperimentPlan italia_plan() {
    ExperimentPlan plan;
    plan.dataset_path = kItalia / "italia.csv";
    plan.config_path = kItalia / "config.json";
    return plan;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

TEST(KGrid, DefaultAndParsing) {
    const auto grid = default_k_grid();
    ASSERT_EQ(grid.size(), 21u);
    EXPECT_EQ(grid.front(), 2);
    EXPECT_EQ(grid[1], 5);
    EXPECT_EQ(grid.back(), 100);
    EXPECT_EQ(parse_k_grid("default"), grid);
    EXPECT_EQ(parse_k_grid("2, 10,50"), (std::vector<int>{2, 10, 50}));
    EXPECT_THROW(parse_k_grid("2,x"), Error);
    EXPECT_THROW(parse_k_grid("2.5"), Error);
}

TEST(Plan, Validation) {
    auto plan = italia_plan();
    plan.k_values = {1, 5};
    EXPECT_THROW(plan.validate(), Error);
    plan.k_values = {5, 5};
    EXPECT_THROW(plan.validate(), Error);
    plan.k_values = {};
    EXPECT_THROW(plan.validate(), Error);
    plan.k_values = {2, 5};
    plan.algorithms.clear();
    EXPECT_THROW(plan.validate(), Error);
}

TEST(Experiment, ItaliaFullGrid) {
    const auto r = run_experiment(italia_plan());
    EXPECT_EQ(r.n, 100u);
    EXPECT_EQ(r.cells.size(), 21u * 3u);
    for (const char* alg : {"BM", "TDGA", "CBA"}) EXPECT_EQ(r.anonymize_table.at(100, alg).text(), "=") << alg;
    for (const auto& [key, cell] : r.anonymize_table.cells) {
        EXPECT_NE(cell.kind, ReportCell::Kind::less);
        EXPECT_NE(cell.kind, ReportCell::Kind::failed) << cell.note;
    }
    for (const auto& [key, cell] : r.augmented_table.cells) {
        EXPECT_NE(cell.kind, ReportCell::Kind::less) << key.first << " " << key.second;
        EXPECT_NE(cell.kind, ReportCell::Kind::failed) << cell.note;
    }
}

TEST(Experiment, KAboveNIsSkipped) {
    auto plan = italia_plan();
    plan.k_values = {50, 150};
    plan.algorithms = {Algorithm::cba};
    const auto r = run_experiment(plan);
    const auto& cell = r.anonymize_table.at(150, "CBA");
    EXPECT_EQ(cell.kind, ReportCell::Kind::skipped);
    EXPECT_EQ(cell.text(), "skipped: k exceeds n");
    EXPECT_EQ(r.augmented_table.at(150, "CBA/synth").kind, ReportCell::Kind::skipped);
    EXPECT_EQ(r.anonymize_table.at(50, "CBA").text(), "=");
}

TEST(Experiment, ReportsAreByteIdenticalAcrossRuns) {
    auto plan = italia_plan();
    plan.k_values = {2, 5, 10, 25};
    const auto a = fresh_dir("kanon_harness_a");
    const auto b = fresh_dir("kanon_harness_b");
    write_reports(run_experiment(plan), plan, a);
    write_reports(run_experiment(plan), plan, b);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file() || entry.path().filename() == "metadata.json") continue;
        const auto rel = std::filesystem::relative(entry.path(), a);
        EXPECT_EQ(read_file(entry.path()), read_file(b / rel)) << rel;
    }
    EXPECT_TRUE(std::filesystem::exists(a / "metadata.json"));
    EXPECT_TRUE(std::filesystem::exists(a / "datasets" / "TDGA_k5.csv"));
    EXPECT_TRUE(std::filesystem::exists(a / "datasets" / "TDGA_k5_synth_merged.csv"));
}

TEST(Experiment, ReportedCellsMatchReauditFromDisk) {
    auto plan = italia_plan();
    plan.k_values = {2, 3, 7, 10, 15};
    const auto dir = fresh_dir("kanon_harness_reaudit");
    const auto r = run_experiment(plan);
    write_reports(r, plan, dir);
    const auto cfg = load_schema_config(plan.config_path);
    for (const auto& c : r.cells) {
        const auto stem = to_string(c.algorithm) + "_k" + std::to_string(c.k);
        const auto d = load_dataset_file(dir / "datasets" / (stem + ".csv"), cfg, CellMode::generalized);
        EXPECT_EQ(compare_cell(static_cast<std::size_t>(c.k), calc_k(d)).text(), c.anonymize_cell.text()) << stem;
        const auto m = load_dataset_file(dir / "datasets" / (stem + "_synth_merged.csv"), cfg, CellMode::generalized);
        EXPECT_EQ(compare_cell(static_cast<std::size_t>(c.k), calc_k(m)).text(), c.augmented.at(0).cell.text()) << stem;
    }
}

TEST(Experiment, ParallelMatchesSerial) {
    auto plan = italia_plan();
    plan.k_values = {2, 5, 10, 20, 40};
    const auto serial = run_experiment(plan);
    plan.parallel = 4;
    const auto parallel = run_experiment(plan);
    EXPECT_EQ(results_json(serial, plan), results_json(parallel, plan));
    EXPECT_EQ(format_table_text(serial.augmented_table), format_table_text(parallel.augmented_table));
}

TEST(Experiment, SamplesOnce) {
    auto plan = italia_plan();
    plan.k_values = {2, 5};
    plan.sample_count = 40;
    const auto r = run_experiment(plan);
    EXPECT_EQ(r.n, 40u);
    for (const auto& c : r.cells) EXPECT_EQ(c.anonymized->n(), 40u);
}

TEST(Tables, TextAndCsvFormats) {
    ExperimentTable t{"t", {2, 5}, {"BM", "CBA"}, {}};
    t.cells[{2, "BM"}] = compare_cell(2, 2);
    t.cells[{2, "CBA"}] = compare_cell(2, 3);
    t.cells[{5, "BM"}] = compare_cell(5, 4);
    t.cells[{5, "CBA"}] = {ReportCell::Kind::skipped, 0, "k exceeds n"};
    EXPECT_EQ(format_table_csv(t), "k,BM,CBA\n2,=,>(3)\n5,<(4),skipped: k exceeds n\n");
    const auto text = format_table_text(t);
    EXPECT_EQ(text.substr(0, text.find('\n')).back(), 'A');
    EXPECT_NE(text.find("<(4)"), std::string::npos);
}

} // namespace
} // namespace kanon
