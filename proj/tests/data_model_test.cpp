#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

namespace kanon {
namespace {

using testing::city_config;
using testing::city_dataset;

std::vector<std::string> sorted_rows(const Dataset& d) {
    std::vector<std::string> rows;
    for (const auto& r : d.records) {
        std::string s;
        for (const auto& c : r.values) s += render_cell(c) + "|";
        rows.push_back(s);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

TEST(LoadDataset, ItaliaProfileHasExpectedShape) {
    const auto cfg = load_schema_config(std::string(KANON_TEST_DATA_DIR) + "/italia/config.json");
    const auto d = load_dataset_file(std::string(KANON_TEST_DATA_DIR) + "/italia/italia.csv", cfg);
    EXPECT_EQ(d.n(), 100u);
    EXPECT_EQ(d.m(), 4u);
    EXPECT_EQ(d.z(), 3u);
    EXPECT_EQ(d.provenance, Provenance::original());
    for (const auto& r : d.records)
        for (const auto& c : r.values)
            EXPECT_TRUE(std::holds_alternative<std::string>(c) || std::holds_alternative<double>(c));
}

TEST(LoadDataset, HeaderOnlyGivesEmptyDataset) {
    const auto d = load_dataset("age,city,disease\n", city_config());
    EXPECT_EQ(d.n(), 0u);
    EXPECT_EQ(d.m(), 3u);
}

TEST(LoadDataset, InfersNumericDomainWhenNotConfigured) {
    const auto d = city_dataset("20,Milan,Flu\n30,Naples,Flu\n40,Bari,Cold\n", false);
    ASSERT_TRUE(d.schema->attributes[0].numeric_domain);
    EXPECT_EQ(*d.schema->attributes[0].numeric_domain, (NumericDomain{20, 40}));
}

TEST(LoadDataset, ConfiguredDomainWins) {
    const auto d = city_dataset("20,Milan,Flu\n40,Bari,Cold\n");
    EXPECT_EQ(*d.schema->attributes[0].numeric_domain, (NumericDomain{0, 100}));
}

TEST(LoadDataset, Errors) {
    EXPECT_THROW(load_dataset("", city_config()), ParseError);
    EXPECT_THROW(load_dataset("age,city\n1,Milan\n", city_config()), SchemaError);
    EXPECT_THROW(load_dataset("age,town,disease\n1,Milan,Flu\n", city_config()), SchemaError);
    EXPECT_THROW(load_dataset("age,age,disease\n1,2,Flu\n", city_config()), ParseError);
    EXPECT_THROW(city_dataset("abc,Milan,Flu\n"), ParseError);
    EXPECT_THROW(city_dataset("20,Rome,Flu\n"), ParseError); // not a leaf of the hierarchy
    EXPECT_THROW(city_dataset("20,Milan\n"), ParseError);
}

TEST(LoadDataset, ColumnOrderFollowsHeader) {
    const auto d = load_dataset("disease,age,city\nFlu,20,Milan\n", city_config());
    EXPECT_EQ(d.schema->attributes[0].name, "disease");
    EXPECT_EQ(d.records[0].values[1], Cell{20.0});
}

TEST(LoadDataset, QuestionMarkIsAnOrdinaryValue) {
    auto cfg = testing::make_config(R"({"attributes":[
        {"name":"country","kind":"categorical","role":"qi","hierarchy":"h"},
        {"name":"y","kind":"categorical","role":"sensitive"}]})",
                                    {{"country", "US;*\n?;*\n"}});
    const auto d = load_dataset("country,y\n?,a\nUS,b\n?,c\n", cfg);
    EXPECT_EQ(d.n(), 3u);
    EXPECT_EQ(d.records[0].values[0], Cell{std::string("?")});
}

TEST(LoadDataset, GeneralizedModeAcceptsIntervalsAndInternalLabels) {
    const auto d = load_dataset("age,city,disease\n20-30,Northern Italy,Flu\n-5..3,Milan,Cold\n", city_config(false),
                                CellMode::generalized);
    EXPECT_EQ(d.records[0].values[0], Cell{(Interval{20, 30})});
    EXPECT_EQ(d.records[0].values[1], Cell{NodeLabel{"Northern Italy"}});
    EXPECT_EQ(d.records[1].values[0], Cell{(Interval{-5, 3})});
    EXPECT_EQ(*d.schema->attributes[0].numeric_domain, (NumericDomain{-5, 30}));
    EXPECT_THROW(load_dataset("age,city,disease\n20-30,Milan,Flu\n", city_config()), ParseError);
}

TEST(SchemaConfig, Validation) {
    EXPECT_THROW(parse_schema_config(nlohmann::json::parse(R"({"attributes":[]})"), {}, false), SchemaError);
    EXPECT_THROW(parse_schema_config(nlohmann::json::parse(R"({"attributes":[
        {"name":"a","kind":"numeric","role":"qi"},{"name":"a","kind":"numeric","role":"qi"}]})"), {}, false),
                 SchemaError);
    EXPECT_THROW(parse_schema_config(nlohmann::json::parse(R"({"attributes":[
        {"name":"c","kind":"categorical","role":"qi"}]})"), {}, false),
                 SchemaError);
    EXPECT_THROW(parse_schema_config(nlohmann::json::parse(R"({"attributes":[
        {"name":"a","kind":"numeric","role":"sensitive"},{"name":"b","kind":"numeric","role":"sensitive"}]})"), {}, false),
                 SchemaError);
    EXPECT_THROW(parse_schema_config(nlohmann::json::parse(R"({"attributes":[
        {"name":"a","kind":"text","role":"qi"}]})"), {}, false),
                 SchemaError);
}

TEST(Render, IntervalsAndLabels) {
    EXPECT_EQ(render_cell(Interval{20, 30}), "20-30");
    EXPECT_EQ(render_cell(Interval{20.5, 30}), "20.5-30");
    EXPECT_EQ(render_cell(Interval{-10, 5}), "-10..5");
    EXPECT_EQ(render_cell(NodeLabel{"Northern Italy"}), "Northern Italy");
    EXPECT_EQ(render_cell(42.0), "42");
    EXPECT_EQ(render_cell(0.1), "0.1");
    EXPECT_EQ(parse_interval("26-35"), (Interval{26, 35}));
    EXPECT_EQ(parse_interval("1 - 50"), (Interval{1, 50}));
    EXPECT_EQ(parse_interval("-10..5"), (Interval{-10, 5}));
    EXPECT_FALSE(parse_interval("30-20"));
    EXPECT_FALSE(parse_interval("abc"));
}

TEST(SerializeCsv, RendersGeneralizedCells) {
    auto d = city_dataset("20,Milan,Flu\n30,Naples,Cold\n");
    d.records[0].values[0] = Interval{20, 30};
    d.records[0].values[1] = NodeLabel{"Northern Italy"};
    EXPECT_EQ(serialize_csv(d), "age,city,disease\n20-30,Northern Italy,Flu\n30,Naples,Cold\n");
}

TEST(SerializeCsv, RoundTripsRandomOriginalDatasets) {
    const std::vector<std::string> cities{"Milan", "Turin", "Naples", "Bari"};
    const std::vector<std::string> diseases{"Flu", "Cold, mild", "\"Odd\"", "?"};
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::string body;
        for (std::size_t i = 0, n = rng.index(30); i < n; ++i) {
            const double age = static_cast<double>(rng.index(2000)) / 8.0 - 50.0;
            csv::append_row(body, {format_number(age), cities[rng.index(4)], diseases[rng.index(4)]});
        }
        const auto first = city_dataset(body, trial % 2 == 0);
        const auto again = load_dataset(serialize_csv(first), city_config(trial % 2 == 0));
        EXPECT_EQ(first, again);
        EXPECT_EQ(serialize_csv(again), serialize_csv(first));
    }
}

TEST(SampleRecords, DeterministicForSeed) {
    const auto full = profiles::generate(profiles::adult(), 2000, 3);
    const auto a = sample_records(full, 600, 42);
    const auto b = sample_records(full, 600, 42);
    EXPECT_EQ(a.n(), 600u);
    EXPECT_EQ(a.records, b.records);
    EXPECT_NE(sample_records(full, 600, 43).records, a.records);
    EXPECT_EQ(a.schema, full.schema);
}

TEST(SampleRecords, FullAndEmptySamples) {
    const auto d = city_dataset("20,Milan,Flu\n30,Naples,Cold\n40,Bari,Flu\n50,Bari,Flu\n");
    EXPECT_EQ(sorted_rows(sample_records(d, d.n(), 9)), sorted_rows(d));
    EXPECT_EQ(sample_records(d, 0, 9).n(), 0u);
    EXPECT_THROW(sample_records(d, 5, 9), Error);
}

TEST(SampleRecords, IsSubMultiset) {
    const auto full = profiles::generate(profiles::italia(), 100, 1);
    const auto all = sorted_rows(full);
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = sorted_rows(sample_records(full, rng.index(101), rng.next()));
        EXPECT_TRUE(std::includes(all.begin(), all.end(), s.begin(), s.end()));
    }
}

TEST(ValidateRecord, ChecksKindsLabelsAndDomain) {
    const auto d = city_dataset("20,Milan,Flu\n");
    const Schema& s = *d.schema;
    EXPECT_FALSE(validate_record(s, Record{{20.0, std::string("Milan"), std::string("Flu")}}));
    EXPECT_FALSE(validate_record(s, Record{{Interval{10, 30}, NodeLabel{"Italy"}, std::string("Flu")}}));
    EXPECT_TRUE(validate_record(s, Record{{20.0, std::string("Milan")}}));
    EXPECT_TRUE(validate_record(s, Record{{200.0, std::string("Milan"), std::string("Flu")}}));
    EXPECT_TRUE(validate_record(s, Record{{20.0, std::string("Rome"), std::string("Flu")}}));
    EXPECT_TRUE(validate_record(s, Record{{std::string("x"), std::string("Milan"), std::string("Flu")}}));
}

} // namespace
} // namespace kanon
