#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/csv.hpp"
#include "kanon/data_model.hpp"
#include "kanon/rng.hpp"

namespace kanon::profiles {

// Synthetic datasets shaped like the Adult census extract and a 100-row
// Italian epidemiological table. Columns are drawn independently; marginal
// counts are allocated exactly (largest remainder) and shuffled per column.

struct Bucket {
    std::string label;       // group label, also the hierarchy's middle level
    double weight;           // reference count
    std::vector<std::string> leaves; // categorical leaves under the group
    double lo = 0, hi = 0;   // numeric range when leaves is empty
};

struct Column {
    std::string name;
    AttributeKind kind;
    AttributeRole role;
    std::vector<Bucket> buckets;
    std::optional<NumericDomain> domain;
    std::string root_label = "*"; // hierarchy root for categorical QIs
    bool flat_hierarchy = false;  // leaf;root instead of leaf;group;root
};

struct Profile {
    std::string name;
    std::vector<Column> columns;
};

inline Profile italia() {
    Profile p{"italia", {}};
    p.columns.push_back({"age", AttributeKind::numeric, AttributeRole::quasi_identifier,
                         {{"1 - 50", 55, {}, 1, 50}, {"51 - 75", 25, {}, 51, 75}, {"76 - 100", 20, {}, 76, 100}},
                         NumericDomain{1, 100}});
    p.columns.push_back({"city_birth", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"Southern Italy", 19, {"Naples", "Bari", "Salerno", "Reggio Calabria"}},
                          {"Northern Italy", 35, {"Milan", "Turin", "Venice", "Genoa", "Bologna"}},
                          {"Central Italy", 37, {"Rome", "Florence", "Perugia", "Ancona"}},
                          {"Islands", 9, {"Palermo", "Catania", "Cagliari"}}},
                         std::nullopt,
                         "Italy"});
    p.columns.push_back({"zip_code", AttributeKind::numeric, AttributeRole::quasi_identifier,
                         {{"0 - 25K", 21, {}, 0, 24999},
                          {"25K - 50K", 36, {}, 25000, 49999},
                          {"50K - 75K", 13, {}, 50000, 74999},
                          {"75K - 100K", 22, {}, 75000, 99999}},
                         NumericDomain{0, 99999}});
    p.columns.push_back({"disease", AttributeKind::categorical, AttributeRole::sensitive,
                         {{"Heart disease", 21, {"Heart disease"}},
                          {"Anorexia", 21, {"Anorexia"}},
                          {"Autism", 20, {"Autism"}},
                          {"AIDS", 14, {"AIDS"}},
                          {"Alzheimer", 13, {"Alzheimer"}},
                          {"Cancer", 11, {"Cancer"}}}});
    return p;
}

inline Profile adult() {
    Profile p{"adult", {}};
    p.columns.push_back({"age", AttributeKind::numeric, AttributeRole::quasi_identifier,
                         {{"18-25", 5290, {}, 18, 25}, {"26-35", 8054, {}, 26, 35}, {"36-45", 7734, {}, 36, 45},
                          {"46+", 9084, {}, 46, 90}},
                         NumericDomain{17, 90}});
    p.columns.push_back({"workclass", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"Private-sector", 22286, {"Private"}},
                          {"Self-employed", 3573, {"Self-emp-not-inc", "Self-emp-inc"}},
                          {"Government", 4289, {"Federal-gov", "State-gov", "Local-gov"}},
                          {"Other-workclass", 14, {"Without-pay", "Never-worked"}}}});
    p.columns.push_back({"education", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"High School or less", 13335,
                           {"Preschool", "1st-4th", "5th-6th", "7th-8th", "9th", "10th", "11th", "12th", "HS-grad"}},
                          {"Some college", 7686, {"Some-college", "Assoc-acdm", "Assoc-voc"}},
                          {"Bachelor's", 5044, {"Bachelors"}},
                          {"Advanced degree", 2544, {"Masters", "Prof-school", "Doctorate"}},
                          {"Other-education", 553, {"?"}}}});
    p.columns.push_back({"marital_status", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"Married", 14456, {"Married-civ-spouse", "Married-AF-spouse", "Married-spouse-absent"}},
                          {"Never-Married", 9726, {"Never-married"}},
                          {"Divorced-or-separated", 5153, {"Divorced", "Separated"}},
                          {"Widowed-group", 827, {"Widowed"}}}});
    p.columns.push_back({"occupation", AttributeKind::categorical, AttributeRole::sensitive,
                         {{"Professional", 8042, {"Professional"}},
                          {"Blue-collar", 10918, {"Blue-collar"}},
                          {"Administrative", 3721, {"Administrative"}},
                          {"Sales", 3584, {"Sales"}},
                          {"Service", 3999, {"Service"}}}});
    p.columns.push_back({"race", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"White", 25933, {"White"}}, {"Black", 2817, {"Black"}}, {"Other", 1412, {"Other"}}},
                         std::nullopt, "*", true});
    p.columns.push_back({"sex", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"Male", 20380, {"Male"}}, {"Female", 9782, {"Female"}}},
                         std::nullopt, "*", true});
    p.columns.push_back({"native_country", AttributeKind::categorical, AttributeRole::quasi_identifier,
                         {{"US", 27504, {"United-States"}},
                          {"North America", 826, {"Canada", "Mexico", "Puerto-Rico", "Cuba"}},
                          {"Asia", 1039, {"India", "China", "Philippines", "Japan", "Vietnam"}},
                          {"Europe", 520, {"Germany", "England", "Italy", "Poland", "France"}},
                          {"Other-country", 273, {"South", "Jamaica", "?"}}}});
    p.columns.push_back({"salary_class", AttributeKind::categorical, AttributeRole::insensitive,
                         {{"<=50K", 22654, {"<=50K"}}, {">50K", 7508, {">50K"}}}});
    return p;
}

inline Profile by_name(std::string_view name) {
    if (name == "italia") return italia();
    if (name == "adult") return adult();
    throw Error("unknown profile '" + std::string(name) + "' (expected adult or italia)");
}

/// Exact per-bucket counts for n rows, largest remainder first.
inline std::vector<std::size_t> allocate(const std::vector<Bucket>& buckets, std::size_t n) {
    double total = 0;
    for (const auto& b : buckets) total += b.weight;
    std::vector<std::size_t> counts(buckets.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        const double exact = static_cast<double>(n) * buckets[i].weight / total;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
    return counts;
}

inline std::string generate_csv(const Profile& p, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::string>> columns;
    for (const auto& col : p.columns) {
        const auto counts = allocate(col.buckets, n);
        std::vector<std::size_t> bucket_of;
        for (std::size_t b = 0; b < counts.size(); ++b) bucket_of.insert(bucket_of.end(), counts[b], b);
        for (std::size_t i = bucket_of.size(); i > 1; --i) std::swap(bucket_of[i - 1], bucket_of[rng.index(i)]);
        std::vector<std::string> values;
        for (std::size_t b : bucket_of) {
            const auto& bucket = col.buckets[b];
            if (bucket.leaves.empty()) {
                const auto span = static_cast<std::size_t>(bucket.hi - bucket.lo) + 1;
                values.push_back(format_number(bucket.lo + static_cast<double>(rng.index(span))));
            } else {
                values.push_back(bucket.leaves[rng.index(bucket.leaves.size())]);
            }
        }
        columns.push_back(std::move(values));
    }
    std::vector<csv::Row> rows;
    csv::Row header;
    for (const auto& col : p.columns) header.push_back(col.name);
    rows.push_back(header);
    for (std::size_t r = 0; r < n; ++r) {
        csv::Row row;
        for (const auto& c : columns) row.push_back(c[r]);
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

/// Leaf-to-root hierarchy file for a categorical quasi-identifier column.
inline std::string hierarchy_csv(const Column& col) {
    std::string out;
    for (const auto& b : col.buckets)
        for (const auto& leaf : b.leaves)
            out += col.flat_hierarchy ? leaf + ";" + col.root_label + "\n"
                                      : leaf + ";" + b.label + ";" + col.root_label + "\n";
    return out;
}

inline std::string hierarchy_file_name(const Column& col) { return "hierarchy_" + col.name + ".csv"; }

inline nlohmann::json schema_config_json(const Profile& p) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& col : p.columns) {
        nlohmann::json a{{"name", col.name},
                         {"kind", col.kind == AttributeKind::numeric ? "numeric" : "categorical"},
                         {"role", col.role == AttributeRole::quasi_identifier ? "qi"
                                  : col.role == AttributeRole::sensitive    ? "sensitive"
                                                                            : "insensitive"}};
        if (col.domain) a["domain"] = {{"min", col.domain->min}, {"max", col.domain->max}};
        if (col.kind == AttributeKind::categorical && col.role == AttributeRole::quasi_identifier)
            a["hierarchy"] = hierarchy_file_name(col);
        attrs.push_back(std::move(a));
    }
    return {{"attributes", attrs}};
}

/// In-memory config with hierarchies built from the profile itself.
inline SchemaConfig schema_config(const Profile& p) {
    SchemaConfig cfg = parse_schema_config(schema_config_json(p), {}, false);
    for (const auto& col : p.columns)
        if (col.kind == AttributeKind::categorical && col.role == AttributeRole::quasi_identifier)
            cfg.taxonomies.emplace(col.name, load_hierarchy(hierarchy_csv(col), col.name));
    return cfg;
}

inline Dataset generate(const Profile& p, std::size_t n, std::uint64_t seed) {
    return load_dataset(generate_csv(p, n, seed), schema_config(p));
}

/// Writes config.json, the hierarchy files and `<name>.csv` into `dir`.
inline void write_profile(const Profile& p, const std::filesystem::path& dir, std::size_t n, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    write_file(dir / "config.json", schema_config_json(p).dump(2) + "\n");
    for (const auto& col : p.columns)
        if (col.kind == AttributeKind::categorical && col.role == AttributeRole::quasi_identifier)
            write_file(dir / hierarchy_file_name(col), hierarchy_csv(col));
    write_file(dir / (p.name + ".csv"), generate_csv(p, n, seed));
}

} // namespace kanon::profiles
