#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "test_util.hpp"

namespace kanon {
namespace {

SchemaConfig abc_config(int qis) {
    std::string attrs;
    for (int q = 0; q < qis; ++q) attrs += R"({"name":"q)" + std::to_string(q) + R"(","kind":"categorical","role":"insensitive"},)";
    auto cfg = testing::make_config(R"({"attributes":[)" + attrs + R"({"name":"s","kind":"categorical","role":"sensitive"}]})");
    // Flat hierarchy over every label the examples use.
    constexpr const char* flat = "a;*\nb;*\nc;*\ng;*\nunique;*\nA;*\nB;*\n1;*\n2;*\n";
    for (int q = 0; q < qis; ++q) {
        auto& attr = cfg.attributes[static_cast<std::size_t>(q)];
        attr.role = AttributeRole::quasi_identifier;
        cfg.taxonomies.emplace(attr.name, load_hierarchy(flat, attr.name));
    }
    return cfg;
}

// Random flat dataset: z string-valued quasi-identifiers (numeric kind so no
// hierarchy is needed) and one sensitive column.
Dataset random_dataset(Rng& rng, std::size_t n, std::size_t z) {
    std::string attrs;
    std::string header;
    for (std::size_t q = 0; q < z; ++q) {
        attrs += R"({"name":"q)" + std::to_string(q) + R"(","kind":"numeric","role":"qi"},)";
        header += "q" + std::to_string(q) + ",";
    }
    auto cfg = testing::make_config(R"({"attributes":[)" + attrs + R"({"name":"s","kind":"categorical","role":"sensitive"}]})");
    std::string body = header + "s\n";
    const std::size_t arity = 1 + rng.index(3);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < z; ++q) body += std::to_string(rng.index(arity)) + ",";
        body += "v" + std::to_string(rng.index(4)) + "\n";
    }
    return load_dataset(body, cfg);
}

// Independent O(n^2) oracle: a record's class is everything whose QI cells
// compare equal pairwise.
std::size_t k_oracle(const Dataset& d) {
    const auto qis = d.schema->qi_indices();
    std::size_t k = d.n();
    for (std::size_t i = 0; i < d.n(); ++i) {
        std::size_t same = 0;
        for (std::size_t j = 0; j < d.n(); ++j) {
            bool eq = true;
            for (auto c : qis) eq = eq && render_cell(d.records[i].values[c]) == render_cell(d.records[j].values[c]);
            same += eq;
        }
        k = std::min(k, same);
    }
    return k;
}

std::size_t l_oracle(const Dataset& d) {
    const auto qis = d.schema->qi_indices();
    const auto s = *d.schema->sensitive_index();
    std::size_t l = d.n();
    for (std::size_t i = 0; i < d.n(); ++i) {
        std::set<std::string> values;
        for (std::size_t j = 0; j < d.n(); ++j) {
            bool eq = true;
            for (auto c : qis) eq = eq && render_cell(d.records[i].values[c]) == render_cell(d.records[j].values[c]);
            if (eq) values.insert(render_cell(d.records[j].values[s]));
        }
        l = std::min(l, values.size());
    }
    return l;
}

TEST(EquivalenceClasses, NoQuasiIdentifiersGivesOneClass) {
    auto d = load_dataset("q0,s\na,x\nb,y\nc,z\n", abc_config(1));
    auto schema = std::make_shared<Schema>(*d.schema);
    schema->attributes[0].role = AttributeRole::insensitive;
    d.schema = schema;
    const auto classes = equivalence_classes(d);
    ASSERT_EQ(classes.size(), 1u);
    EXPECT_EQ(classes[0].member_indices.size(), 3u);
    EXPECT_TRUE(classes[0].signature.empty());
}

TEST(EquivalenceClasses, GroupsByRenderedSignatureInFirstMemberOrder) {
    const auto d = load_dataset("q0,q1,s\nB,2,x\nA,1,x\nA,1,y\nB,2,x\nA,1,z\n", abc_config(2));
    const auto classes = equivalence_classes(d);
    ASSERT_EQ(classes.size(), 2u);
    EXPECT_EQ(classes[0].signature, (std::vector<std::string>{"B", "2"}));
    EXPECT_EQ(classes[0].member_indices, (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(classes[1].member_indices, (std::vector<std::size_t>{1, 2, 4}));
}

TEST(EquivalenceClasses, IntervalAndRawStringWithSameTextCollide) {
    auto cfg = testing::make_config(R"({"attributes":[{"name":"a","kind":"categorical","role":"insensitive"},
        {"name":"s","kind":"categorical","role":"sensitive"}]})");
    cfg.attributes[0].role = AttributeRole::quasi_identifier;
    cfg.taxonomies.emplace("a", load_hierarchy("20-30;*\n", "a"));
    auto d = load_dataset("a,s\n20-30,x\n20-30,y\n", cfg);
    d.records[1].values[0] = Interval{20, 30};
    EXPECT_EQ(equivalence_classes(d).size(), 1u);
}

TEST(CalcK, Examples) {
    EXPECT_EQ(calc_k(load_dataset("q0,s\n" + [] { std::string s; for (int i = 0; i < 10; ++i) s += "a,x\n"; return s; }(),
                                  abc_config(1))),
              10u);
    EXPECT_EQ(calc_k(load_dataset("q0,s\na,x\na,x\na,x\nb,x\nb,x\nc,x\nc,x\nc,x\nc,x\nc,x\n", abc_config(1))), 2u);
    std::string body = "q0,s\nunique,x\n";
    for (int i = 0; i < 99; ++i) body += "g,x\n";
    EXPECT_EQ(calc_k(load_dataset(body, abc_config(1))), 1u);
    EXPECT_THROW(calc_k(load_dataset("q0,s\n", abc_config(1))), Error);
}

TEST(CalcLDistinct, Examples) {
    EXPECT_EQ(calc_l_distinct(load_dataset("q0,s\na,flu\na,flu\na,cancer\n", abc_config(1))), 2u);
    EXPECT_EQ(calc_l_distinct(load_dataset("q0,s\na,flu\nb,flu\nb,flu\n", abc_config(1))), 1u);
    EXPECT_EQ(calc_l_distinct(load_dataset("q0,s\na,x\na,y\na,z\nb,x\nb,y\n", abc_config(1))), 2u);
    auto no_s = testing::make_config(R"({"attributes":[{"name":"a","kind":"numeric","role":"qi"}]})");
    EXPECT_THROW(calc_l_distinct(load_dataset("a\n1\n", no_s)), Error);
}

TEST(CompareCell, ReportNotation) {
    EXPECT_EQ(compare_cell(20, 22).text(), ">(22)");
    EXPECT_EQ(compare_cell(55, 54).text(), "<(54)");
    EXPECT_EQ(compare_cell(10, 10).text(), "=");
}

TEST(AuditReport, HistogramAndJson) {
    const auto d = load_dataset("q0,s\na,x\na,y\nb,x\nb,x\nb,y\nc,x\nc,z\n", abc_config(1));
    const auto r = audit(d);
    EXPECT_EQ(r.k, 2u);
    EXPECT_EQ(r.class_count, 3u);
    EXPECT_EQ(r.class_size_histogram, (std::map<std::size_t, std::size_t>{{2, 2}, {3, 1}}));
    const auto j = to_json(r);
    EXPECT_EQ(j["k"], 2);
    EXPECT_EQ(j["l_distinct"], 2);
    EXPECT_EQ(j["class_size_histogram"]["3"], 1);
}

TEST(AuditProperties, MatchesBruteForceOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = random_dataset(rng, 1 + rng.index(200), rng.index(5));
        ASSERT_EQ(calc_k(d), k_oracle(d));
        ASSERT_EQ(calc_l_distinct(d), l_oracle(d));
    }
}

TEST(AuditProperties, PermutationDuplicationAndAppend) {
    Rng rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = random_dataset(rng, 1 + rng.index(80), 1 + rng.index(3));
        const auto k = calc_k(d);
        const auto l = calc_l_distinct(d);

        auto shuffled = d;
        for (std::size_t i = shuffled.n(); i > 1; --i) std::swap(shuffled.records[i - 1], shuffled.records[rng.index(i)]);
        EXPECT_EQ(calc_k(shuffled), k);
        EXPECT_EQ(calc_l_distinct(shuffled), l);

        auto doubled = d;
        doubled.records.insert(doubled.records.end(), d.records.begin(), d.records.end());
        EXPECT_EQ(calc_k(doubled), 2 * k);

        auto appended = d;
        appended.records.push_back(d.records[rng.index(d.n())]);
        EXPECT_GE(calc_k(appended), k);
    }
}

} // namespace
} // namespace kanon
