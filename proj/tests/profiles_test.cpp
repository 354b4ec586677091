#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "test_util.hpp"

namespace kanon {
namespace {

TEST(Allocate, LargestRemainderHitsTotal) {
    const std::vector<profiles::Bucket> buckets{{"a", 1, {}}, {"b", 1, {}}, {"c", 1, {}}};
    EXPECT_EQ(profiles::allocate(buckets, 10), (std::vector<std::size_t>{4, 3, 3}));
    EXPECT_EQ(profiles::allocate(buckets, 0), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(Profiles, ItaliaMarginalsAreExact) {
    const auto p = profiles::italia();
    const auto d = profiles::generate(p, 100, 3);
    EXPECT_EQ(d.n(), 100u);
    EXPECT_EQ(d.z(), 3u);
    for (std::size_t c = 0; c < p.columns.size(); ++c) {
        const auto& col = p.columns[c];
        std::vector<std::size_t> counts(col.buckets.size(), 0);
        for (const auto& r : d.records) {
            for (std::size_t b = 0; b < col.buckets.size(); ++b) {
                const auto& bucket = col.buckets[b];
                bool in = false;
                if (bucket.leaves.empty()) {
                    const double v = std::get<double>(r.values[c]);
                    in = bucket.lo <= v && v <= bucket.hi;
                } else {
                    in = std::find(bucket.leaves.begin(), bucket.leaves.end(), render_cell(r.values[c])) !=
                         bucket.leaves.end();
                }
                counts[b] += in;
            }
        }
        // Reference counts that do not sum to n are scaled proportionally.
        double total = 0;
        for (const auto& b : col.buckets) total += b.weight;
        std::size_t sum = 0;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double share = 100.0 * col.buckets[b].weight / total;
            if (total == 100.0) EXPECT_EQ(counts[b], static_cast<std::size_t>(col.buckets[b].weight)) << col.name;
            EXPECT_LT(std::abs(static_cast<double>(counts[b]) - share), 1.0) << col.name;
            sum += counts[b];
        }
        EXPECT_EQ(sum, 100u) << col.name;
    }
}

TEST(Profiles, AdultShape) {
    const auto p = profiles::adult();
    const auto d = profiles::generate(p, 500, 1);
    EXPECT_EQ(d.m(), 9u);
    EXPECT_EQ(d.z(), 7u);
    EXPECT_EQ(d.schema->attributes[*d.schema->sensitive_index()].name, "occupation");
    EXPECT_THROW(profiles::by_name("census"), Error);
}

TEST(Profiles, CheckedInDataMatchesRegeneration) {
    for (const auto& [name, rows] : std::map<std::string, std::size_t>{{"italia", 100}, {"adult", 30162}}) {
        const std::filesystem::path dir = std::filesystem::path(KANON_TEST_DATA_DIR) / name;
        const auto p = profiles::by_name(name);
        EXPECT_EQ(read_file(dir / (name + ".csv")), profiles::generate_csv(p, rows, 7)) << name;
        const auto d = load_dataset_file(dir / (name + ".csv"), load_schema_config(dir / "config.json"));
        EXPECT_EQ(d.n(), rows);
        EXPECT_EQ(d.schema->attributes, profiles::generate(p, 1, 7).schema->attributes) << name;
    }
}

} // namespace
} // namespace kanon
