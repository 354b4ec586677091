#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/data_model.hpp"

namespace kanon {

struct EquivalenceClass {
    std::vector<std::string> signature;
    std::vector<std::size_t> member_indices;
};

struct AnonymityReport {
    std::size_t k = 0;
    std::optional<std::size_t> l_distinct; // absent without a sensitive attribute
    std::size_t class_count = 0;
    std::map<std::size_t, std::size_t> class_size_histogram;
};

namespace detail {

struct SignatureHash {
    std::size_t operator()(const std::vector<std::string>& sig) const noexcept {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (const auto& s : sig) h = (h ^ std::hash<std::string>{}(s)) * 0x100000001b3ULL;
        return h;
    }
};

} // namespace detail

inline std::vector<std::string> qi_signature(const Schema& schema, const Record& rec) {
    std::vector<std::string> sig;
    for (std::size_t c : schema.qi_indices()) sig.push_back(render_cell(rec.values[c]));
    return sig;
}

/// Groups records by their rendered quasi-identifier cells. Classes are
/// ordered by their first member.
inline std::vector<EquivalenceClass> equivalence_classes(const Dataset& d) {
    const auto qis = d.schema->qi_indices();
    std::unordered_map<std::vector<std::string>, std::size_t, detail::SignatureHash> slot;
    std::vector<EquivalenceClass> classes;
    std::vector<std::string> sig;
    for (std::size_t i = 0; i < d.n(); ++i) {
        sig.clear();
        for (std::size_t c : qis) sig.push_back(render_cell(d.records[i].values[c]));
        auto [it, inserted] = slot.try_emplace(sig, classes.size());
        if (inserted) classes.push_back({sig, {}});
        classes[it->second].member_indices.push_back(i);
    }
    return classes;
}

inline std::size_t calc_k(const Dataset& d) {
    if (d.n() == 0) throw Error("calc_k: empty dataset");
    std::size_t k = std::numeric_limits<std::size_t>::max();
    for (const auto& c : equivalence_classes(d)) k = std::min(k, c.member_indices.size());
    return k;
}

inline std::size_t calc_l_distinct(const Dataset& d) {
    const auto s = d.schema->sensitive_index();
    if (!s) throw Error("calc_l_distinct: dataset has no sensitive attribute");
    if (d.n() == 0) throw Error("calc_l_distinct: empty dataset");
    std::size_t l = std::numeric_limits<std::size_t>::max();
    for (const auto& c : equivalence_classes(d)) {
        std::set<std::string> distinct;
        for (std::size_t i : c.member_indices) distinct.insert(render_cell(d.records[i].values[*s]));
        l = std::min(l, distinct.size());
    }
    return l;
}

inline AnonymityReport audit(const Dataset& d) {
    if (d.n() == 0) throw Error("audit: empty dataset");
    AnonymityReport r;
    const auto classes = equivalence_classes(d);
    r.class_count = classes.size();
    r.k = std::numeric_limits<std::size_t>::max();
    for (const auto& c : classes) {
        r.k = std::min(r.k, c.member_indices.size());
        ++r.class_size_histogram[c.member_indices.size()];
    }
    if (d.schema->sensitive_index()) r.l_distinct = calc_l_distinct(d);
    return r;
}

inline nlohmann::json to_json(const AnonymityReport& r) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [size, count] : r.class_size_histogram) hist[std::to_string(size)] = count;
    nlohmann::json j{{"k", r.k}, {"class_count", r.class_count}, {"class_size_histogram", hist}};
    j["l_distinct"] = r.l_distinct ? nlohmann::json(*r.l_distinct) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Report cells: "=", ">(v)", "<(v)", plus harness-only skipped/failed states.

struct ReportCell {
    enum class Kind { equal, greater, less, skipped, failed };
    Kind kind = Kind::equal;
    std::size_t value = 0;
    std::string note;

    std::string text() const {
        switch (kind) {
        case Kind::equal: return "=";
        case Kind::greater: return ">(" + std::to_string(value) + ")";
        case Kind::less: return "<(" + std::to_string(value) + ")";
        case Kind::skipped: return "skipped: " + note;
        case Kind::failed: return "failed: " + note;
        }
        return "?";
    }

    bool operator==(const ReportCell&) const = default;
};

inline ReportCell compare_cell(std::size_t requested_k, std::size_t measured_k) {
    if (measured_k == requested_k) return {ReportCell::Kind::equal, measured_k, {}};
    if (measured_k > requested_k) return {ReportCell::Kind::greater, measured_k, {}};
    return {ReportCell::Kind::less, measured_k, {}};
}

} // namespace kanon
