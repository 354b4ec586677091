#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/csv.hpp"
#include "kanon/error.hpp"
#include "kanon/rng.hpp"
#include "kanon/taxonomy.hpp"

namespace kanon {

enum class AttributeKind { numeric, categorical };
enum class AttributeRole { quasi_identifier, sensitive, insensitive };

struct NumericDomain {
    double min = 0.0;
    double max = 0.0;
    double width() const { return max - min; }
    bool operator==(const NumericDomain&) const = default;
};

struct AttributeSchema {
    std::string name;
    AttributeKind kind = AttributeKind::categorical;
    AttributeRole role = AttributeRole::insensitive;
    std::optional<NumericDomain> numeric_domain;
    std::optional<std::string> taxonomy_ref;

    bool is_qi() const { return role == AttributeRole::quasi_identifier; }
    bool is_numeric() const { return kind == AttributeKind::numeric; }
    bool operator==(const AttributeSchema&) const = default;
};

// ---------------------------------------------------------------------------
// Cells

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

struct NodeLabel {
    std::string label;
    bool operator==(const NodeLabel&) const = default;
};

/// raw(string) | number(real) | interval(lo, hi) | node_label(string)
using Cell = std::variant<std::string, double, Interval, NodeLabel>;

struct Record {
    std::vector<Cell> values;
    bool operator==(const Record&) const = default;
};

/// Integral values print without a decimal point; others use the shortest
/// representation that round-trips.
inline std::string format_number(double v) {
    if (std::isfinite(v) && v == std::trunc(v) && std::fabs(v) < 9.0e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

/// "lo-hi", or "lo..hi" when either bound is negative.
inline std::string format_interval(const Interval& iv) {
    const char* sep = (iv.lo < 0 || iv.hi < 0) ? ".." : "-";
    return format_number(iv.lo) + sep + format_number(iv.hi);
}

inline std::string render_cell(const Cell& c) {
    struct Visitor {
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(double v) const { return format_number(v); }
        std::string operator()(const Interval& iv) const { return format_interval(iv); }
        std::string operator()(const NodeLabel& n) const { return n.label; }
    };
    return std::visit(Visitor{}, c);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Accepts "lo-hi", "lo - hi" and "lo..hi".
inline std::optional<Interval> parse_interval(std::string_view s) {
    s = trim(s);
    std::size_t split = s.find("..");
    std::size_t skip = 2;
    if (split == std::string_view::npos) {
        skip = 1;
        split = std::string_view::npos;
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i] != '-') continue;
            std::size_t j = i;
            while (j > 0 && s[j - 1] == ' ') --j;
            if (j > 0 && (std::isdigit(static_cast<unsigned char>(s[j - 1])) || s[j - 1] == '.')) {
                split = i;
                break;
            }
        }
    }
    if (split == std::string_view::npos) return std::nullopt;
    auto lo = parse_number(s.substr(0, split));
    auto hi = parse_number(s.substr(split + skip));
    if (!lo || !hi || *lo > *hi) return std::nullopt;
    return Interval{*lo, *hi};
}

/// Numeric bounds of a number or interval cell.
inline std::optional<Interval> numeric_bounds(const Cell& c) {
    if (auto v = std::get_if<double>(&c)) return Interval{*v, *v};
    if (auto iv = std::get_if<Interval>(&c)) return *iv;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Schema and dataset

/// Attribute list plus the taxonomies of the categorical quasi-identifiers.
struct Schema {
    std::vector<AttributeSchema> attributes;
    TaxonomySet taxonomies;

    std::size_t size() const { return attributes.size(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < attributes.size(); ++i)
            if (attributes[i].name == name) return i;
        return std::nullopt;
    }

    std::vector<std::size_t> qi_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < attributes.size(); ++i)
            if (attributes[i].is_qi()) out.push_back(i);
        return out;
    }

    std::optional<std::size_t> sensitive_index() const {
        for (std::size_t i = 0; i < attributes.size(); ++i)
            if (attributes[i].role == AttributeRole::sensitive) return i;
        return std::nullopt;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& a : attributes) out.push_back(a.name);
        return out;
    }

    const Taxonomy* taxonomy_for(const AttributeSchema& a) const {
        if (!a.taxonomy_ref) return nullptr;
        auto it = taxonomies.find(*a.taxonomy_ref);
        return it == taxonomies.end() ? nullptr : &it->second;
    }

    bool operator==(const Schema& o) const {
        if (attributes != o.attributes || taxonomies.size() != o.taxonomies.size()) return false;
        for (const auto& [name, t] : taxonomies) {
            auto it = o.taxonomies.find(name);
            if (it == o.taxonomies.end() || it->second.levels() != t.levels()) return false;
        }
        return true;
    }
};

enum class Algorithm { bm, tdga, cba };

inline std::string to_string(Algorithm a) {
    switch (a) {
    case Algorithm::bm: return "BM";
    case Algorithm::tdga: return "TDGA";
    case Algorithm::cba: return "CBA";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "bm" || lower == "mondrian") return Algorithm::bm;
    if (lower == "tdga") return Algorithm::tdga;
    if (lower == "cba") return Algorithm::cba;
    throw Error("unknown algorithm '" + std::string(s) + "' (expected bm, tdga or cba)");
}

struct Provenance {
    enum class Kind { original, anonymized, merged };
    Kind kind = Kind::original;
    Algorithm algorithm = Algorithm::bm; // meaningful for anonymized only
    int requested_k = 0;

    static Provenance original() { return {}; }
    static Provenance anonymized(Algorithm a, int k) { return {Kind::anonymized, a, k}; }
    static Provenance merged() { return {Kind::merged, Algorithm::bm, 0}; }
    bool operator==(const Provenance&) const = default;
};

/// Schema plus an ordered list of records. The schema is shared between a
/// dataset and everything derived from it.
struct Dataset {
    std::shared_ptr<const Schema> schema;
    std::vector<Record> records;
    Provenance provenance;

    std::size_t n() const { return records.size(); }
    std::size_t m() const { return schema->size(); }
    std::size_t z() const { return schema->qi_indices().size(); }

    bool operator==(const Dataset& o) const {
        return *schema == *o.schema && records == o.records && provenance == o.provenance;
    }
};

// ---------------------------------------------------------------------------
// Schema configuration

struct AttributeConfig {
    std::string name;
    AttributeKind kind = AttributeKind::categorical;
    AttributeRole role = AttributeRole::insensitive;
    std::optional<NumericDomain> domain;
    std::optional<std::string> hierarchy_path;
};

/// Parsed schema config with hierarchies already loaded.
struct SchemaConfig {
    std::vector<AttributeConfig> attributes;
    TaxonomySet taxonomies;
};

inline SchemaConfig parse_schema_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                                        bool load_hierarchies = true) {
    SchemaConfig cfg;
    if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array())
        throw SchemaError("schema config: expected an object with an \"attributes\" array");
    std::unordered_set<std::string> seen;
    std::size_t sensitive_count = 0;
    for (const auto& a : j["attributes"]) {
        AttributeConfig ac;
        ac.name = a.at("name").get<std::string>();
        if (ac.name.empty()) throw SchemaError("schema config: empty attribute name");
        if (!seen.insert(ac.name).second) throw SchemaError("schema config: duplicate attribute '" + ac.name + "'");
        const auto kind = a.at("kind").get<std::string>();
        if (kind == "numeric") ac.kind = AttributeKind::numeric;
        else if (kind == "categorical") ac.kind = AttributeKind::categorical;
        else throw SchemaError("schema config: attribute '" + ac.name + "' has unknown kind '" + kind + "'");
        const auto role = a.at("role").get<std::string>();
        if (role == "qi") ac.role = AttributeRole::quasi_identifier;
        else if (role == "sensitive") ac.role = AttributeRole::sensitive, ++sensitive_count;
        else if (role == "insensitive") ac.role = AttributeRole::insensitive;
        else throw SchemaError("schema config: attribute '" + ac.name + "' has unknown role '" + role + "'");
        if (a.contains("domain") && !a["domain"].is_null()) {
            if (ac.kind != AttributeKind::numeric)
                throw SchemaError("schema config: domain given for categorical attribute '" + ac.name + "'");
            NumericDomain d{a["domain"].at("min").get<double>(), a["domain"].at("max").get<double>()};
            if (d.min > d.max) throw SchemaError("schema config: domain min > max for '" + ac.name + "'");
            ac.domain = d;
        }
        if (a.contains("hierarchy") && !a["hierarchy"].is_null()) ac.hierarchy_path = a["hierarchy"].get<std::string>();
        if (ac.kind == AttributeKind::categorical && ac.role == AttributeRole::quasi_identifier && !ac.hierarchy_path)
            throw SchemaError("schema config: categorical quasi-identifier '" + ac.name + "' needs a hierarchy");
        cfg.attributes.push_back(std::move(ac));
    }
    if (cfg.attributes.empty()) throw SchemaError("schema config: no attributes");
    if (sensitive_count > 1) throw SchemaError("schema config: at most one sensitive attribute is supported");

    if (load_hierarchies) {
        for (const auto& ac : cfg.attributes) {
            if (!ac.hierarchy_path || ac.role != AttributeRole::quasi_identifier) continue;
            const auto path = base_dir / *ac.hierarchy_path;
            std::ifstream in(path, std::ios::binary);
            if (!in) throw SchemaError("cannot open hierarchy file " + path.string());
            std::stringstream buf;
            buf << in.rdbuf();
            cfg.taxonomies.emplace(ac.name, load_hierarchy(buf.str(), ac.name));
        }
    }
    return cfg;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline SchemaConfig load_schema_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("schema config " + path.string() + ": " + e.what());
    }
    return parse_schema_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Ingestion

enum class CellMode {
    /// Only raw values: numbers in numeric columns, taxonomy leaves in
    /// categorical quasi-identifier columns.
    original,
    /// Also accepts intervals in numeric columns and internal taxonomy
    /// labels in categorical quasi-identifier columns.
    generalized,
};

namespace detail {

inline std::vector<csv::Row> drop_blank_rows(std::vector<csv::Row> rows) {
    std::erase_if(rows, [](const csv::Row& r) { return r.size() == 1 && trim(r[0]).empty(); });
    return rows;
}

} // namespace detail

/// Converts one field into a cell for the given attribute. Returns an error
/// message instead of a cell when the text does not fit.
inline std::variant<Cell, std::string> parse_field(const Schema& schema, std::size_t column, std::string_view text,
                                                   CellMode mode) {
    const auto& attr = schema.attributes[column];
    if (attr.is_numeric()) {
        if (auto v = parse_number(text)) return Cell{*v};
        if (mode == CellMode::generalized)
            if (auto iv = parse_interval(text)) return Cell{*iv};
        return "non-numeric token '" + std::string(text) + "' in numeric column '" + attr.name + "'";
    }
    if (attr.is_qi()) {
        const Taxonomy* tax = schema.taxonomy_for(attr);
        if (!tax) return "no taxonomy loaded for '" + attr.name + "'";
        auto id = tax->find(text);
        if (!id) return "value '" + std::string(text) + "' is not in the hierarchy of '" + attr.name + "'";
        if (tax->is_leaf(*id)) return Cell{std::string(text)};
        if (mode == CellMode::generalized) return Cell{NodeLabel{std::string(text)}};
        return "value '" + std::string(text) + "' is not a leaf of the hierarchy of '" + attr.name + "'";
    }
    return Cell{std::string(text)};
}

/// Reads a CSV body against a schema config. Numeric domains missing from
/// the config are inferred from the column and then frozen in the schema.
inline Dataset load_dataset(std::string_view csv_text, const SchemaConfig& config, CellMode mode = CellMode::original) {
    if (trim(csv_text).empty()) throw ParseError("load_dataset: empty file");
    auto rows = detail::drop_blank_rows(csv::parse(csv_text));
    if (rows.empty()) throw ParseError("load_dataset: empty file");
    const auto& header = rows.front();

    {
        std::unordered_set<std::string> names;
        for (const auto& h : header)
            if (!names.insert(h).second) throw ParseError("load_dataset: duplicate column '" + h + "'");
    }
    if (header.size() != config.attributes.size())
        throw SchemaError("load_dataset: header has " + std::to_string(header.size()) + " columns, config names " +
                          std::to_string(config.attributes.size()));

    auto schema = std::make_shared<Schema>();
    for (const auto& h : header) {
        auto it = std::find_if(config.attributes.begin(), config.attributes.end(),
                               [&](const AttributeConfig& a) { return a.name == h; });
        if (it == config.attributes.end()) throw SchemaError("load_dataset: column '" + h + "' is not in the config");
        AttributeSchema as;
        as.name = it->name;
        as.kind = it->kind;
        as.role = it->role;
        as.numeric_domain = it->domain;
        if (as.kind == AttributeKind::categorical && as.role == AttributeRole::quasi_identifier) {
            if (!config.taxonomies.contains(as.name))
                throw SchemaError("load_dataset: no hierarchy loaded for '" + as.name + "'");
            as.taxonomy_ref = as.name;
            schema->taxonomies.emplace(as.name, config.taxonomies.find(as.name)->second);
        }
        schema->attributes.push_back(std::move(as));
    }

    Dataset d;
    d.records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw ParseError("load_dataset: row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(header.size()));
        Record rec;
        rec.values.reserve(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            auto parsed = parse_field(*schema, c, row[c], mode);
            if (auto err = std::get_if<std::string>(&parsed))
                throw ParseError("load_dataset: row " + std::to_string(r) + ": " + *err);
            rec.values.push_back(std::get<Cell>(std::move(parsed)));
        }
        d.records.push_back(std::move(rec));
    }

    for (std::size_t c = 0; c < schema->size(); ++c) {
        auto& attr = schema->attributes[c];
        if (!attr.is_numeric() || attr.numeric_domain) continue;
        NumericDomain dom{0.0, 0.0};
        bool first = true;
        for (const auto& rec : d.records) {
            const auto b = *numeric_bounds(rec.values[c]);
            if (first) dom = {b.lo, b.hi}, first = false;
            dom.min = std::min(dom.min, b.lo);
            dom.max = std::max(dom.max, b.hi);
        }
        attr.numeric_domain = dom;
    }

    d.schema = std::move(schema);
    d.provenance = Provenance::original();
    return d;
}

inline Dataset load_dataset_file(const std::filesystem::path& path, const SchemaConfig& config,
                                 CellMode mode = CellMode::original) {
    return load_dataset(read_file(path), config, mode);
}

/// Rebuilds a config from a live schema, so a dataset can be reloaded with
/// the same domains and hierarchies.
inline SchemaConfig config_of(const Schema& schema) {
    SchemaConfig cfg;
    for (const auto& a : schema.attributes)
        cfg.attributes.push_back({a.name, a.kind, a.role, a.numeric_domain, a.taxonomy_ref});
    cfg.taxonomies = schema.taxonomies;
    return cfg;
}

inline std::string serialize_csv(const Dataset& d) {
    std::string out;
    csv::append_row(out, d.schema->names());
    csv::Row row;
    for (const auto& rec : d.records) {
        row.clear();
        for (const auto& c : rec.values) row.push_back(render_cell(c));
        csv::append_row(out, row);
    }
    return out;
}

/// Uniform sample without replacement; the same seed yields the same rows
/// in the same order.
inline Dataset sample_records(const Dataset& d, std::size_t count, std::uint64_t seed) {
    if (count > d.n())
        throw Error("sample_records: count " + std::to_string(count) + " exceeds n = " + std::to_string(d.n()));
    std::vector<std::size_t> idx(d.n());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    // Partial Fisher-Yates: the first `count` slots hold the sample.
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(d.n() - i)]);
    Dataset out{d.schema, {}, d.provenance};
    out.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.records.push_back(d.records[idx[i]]);
    return out;
}

/// Checks arity, cell kinds, taxonomy labels and numeric domains. Returns
/// the first problem found, or nullopt.
inline std::optional<std::string> validate_record(const Schema& schema, const Record& rec) {
    if (rec.values.size() != schema.size())
        return "arity " + std::to_string(rec.values.size()) + " != " + std::to_string(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& attr = schema.attributes[c];
        const auto& cell = rec.values[c];
        if (attr.is_numeric()) {
            auto b = numeric_bounds(cell);
            if (!b) return "non-numeric cell in '" + attr.name + "'";
            if (b->lo > b->hi) return "interval with lo > hi in '" + attr.name + "'";
            if (attr.numeric_domain && (b->lo < attr.numeric_domain->min || b->hi > attr.numeric_domain->max))
                return "value " + render_cell(cell) + " outside the domain of '" + attr.name + "'";
            continue;
        }
        if (std::holds_alternative<double>(cell) || std::holds_alternative<Interval>(cell))
            return "numeric cell in categorical column '" + attr.name + "'";
        if (attr.is_qi()) {
            const Taxonomy* tax = schema.taxonomy_for(attr);
            const std::string label = render_cell(cell);
            if (!tax || !tax->contains(label))
                return "label '" + label + "' is not in the hierarchy of '" + attr.name + "'";
        }
    }
    return std::nullopt;
}

} // namespace kanon
