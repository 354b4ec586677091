#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/audit.hpp"
#include "kanon/data_model.hpp"

namespace kanon {

enum class PromptKind { context_understanding, data_augmentation };

struct RenderedPrompt {
    PromptKind kind = PromptKind::context_understanding;
    std::string text;
    std::string embedded_dataset_csv;
    std::map<std::string, std::string> slot_values;
    /// Length of the prefix that comes from the fixed template; the format
    /// instructions for machine-readable answers follow it.
    std::size_t template_length = 0;
};

struct ExtractedContext {
    struct QuasiIdentifier {
        std::string attribute;
        std::string taxonomy_description;
    };
    std::vector<QuasiIdentifier> quasi_identifiers;
    std::string sensitive_attribute;
    std::string model_free_text;
    /// Names the model used that are not columns of the schema.
    std::vector<std::string> unknown_attributes;
};

/// Per-quasi-identifier generalization levels, one line each in the prompt.
struct GammaSpec {
    std::vector<std::pair<std::string, std::string>> entries; // attribute -> description
};

namespace prompt_text {

// Slot markers as they appear in the template skeletons.
inline constexpr std::string_view kDataset = "[Δ]";
inline constexpr std::string_view kAnonymized = "[Δ′]";
inline constexpr std::string_view kGamma = "[Γ]";
inline constexpr std::string_view kSensitive = "[S]";
inline constexpr std::string_view kK = "[K]";

inline constexpr std::string_view kContextBefore = "Given this attached dataset ";
inline constexpr std::string_view kContextAfter =
    ", I have performed a Data Anonimization task by using the K-Anonimity technique. Please provide a "
    "comprehensive description of it, including the following details:\n"
    "- Dataset Overview: Number of rows (records) and columns (attributes); Purpose and context of the data.\n"
    "Moreover, provide the following column details:\n"
    "List all column names and for each of them, specify the data type (numerical, categorical, etc.); Identify "
    "the quasi-identifier columns whose values could potentially re-identify individuals when combined; Specify "
    "the sensitive column containing confidential information requiring protection; Identify the taxonomy used "
    "to anonymize this dataset. [Γ], [S]";

inline constexpr std::string_view kAugment1 = "Given the attached anonymized dataset ";
inline constexpr std::string_view kAugment2 =
    " and the following information: 1. Quasi-identifiers and their taxonomies: ";
inline constexpr std::string_view kAugment3 = "; 2. A Sensitive attribute: ";
inline constexpr std::string_view kAugment4 = "; Current k-anonymity level: k = ";
inline constexpr std::string_view kAugment5 =
    ".\n\n"
    "Task: Generate new records that can be merged with the original dataset while satisfying the following "
    "conditions: a) The new records must follow the same structure and data types as the original dataset; "
    "b) The values for quasi-identifiers must be consistent with the provided taxonomies; c) The values for the "
    "sensitive attribute must be consistent with the dataset.\n\n"
    "Important considerations: 1) Ensure that the new records do not introduce new unique combinations of "
    "quasi-identifiers that could reduce anonymity; 2) The distribution of sensitive attribute values in the new "
    "records should be similar to the original dataset to prevent attribute disclosure. 3) If possible, aim to "
    "increase or maintain the overall k-anonymity level of the merged dataset. [R″_1], ..., [R″_j]";

inline constexpr std::string_view kContextFormat =
    "\n\nAfter the description, repeat the quasi-identifiers, their taxonomies and the sensitive attribute in a "
    "single fenced ```json code block of the form "
    "{\"quasi_identifiers\": [{\"attribute\": \"<column>\", \"taxonomy\": \"<levels>\"}], "
    "\"sensitive_attribute\": \"<column>\"}.";

} // namespace prompt_text

/// The fixed templates with their slot markers, exactly as the renderer
/// fills them.
inline std::string template_skeleton(PromptKind kind) {
    using namespace prompt_text;
    std::string out;
    if (kind == PromptKind::context_understanding) {
        out.append(kContextBefore).append(kDataset).append(kContextAfter);
    } else {
        out.append(kAugment1).append(kAnonymized).append(kAugment2).append(kGamma).append(kAugment3);
        out.append(kSensitive).append(kAugment4).append(kK).append(kAugment5);
    }
    return out;
}

inline std::string fenced(std::string_view lang, std::string_view body) {
    std::string out = "```";
    out.append(lang).append("\n").append(body);
    if (!body.empty() && body.back() != '\n') out.push_back('\n');
    out.append("```");
    return out;
}

inline std::string inline_dataset(const std::string& csv_text) { return "\n" + fenced("csv", csv_text) + "\n"; }

/// Generalization levels of every quasi-identifier: taxonomy levels for
/// categorical attributes, the distinct observed values for numeric ones.
inline GammaSpec describe_gamma(const Dataset& d) {
    GammaSpec g;
    for (std::size_t c : d.schema->qi_indices()) {
        const auto& attr = d.schema->attributes[c];
        std::string desc;
        if (attr.is_numeric()) {
            std::vector<Interval> seen;
            for (const auto& r : d.records) seen.push_back(*numeric_bounds(r.values[c]));
            std::sort(seen.begin(), seen.end(), [](const Interval& a, const Interval& b) {
                return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi;
            });
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            desc = "numeric, observed intervals: ";
            for (std::size_t i = 0; i < seen.size(); ++i) {
                if (i) desc += ", ";
                desc += seen[i].lo == seen[i].hi ? format_number(seen[i].lo) : format_interval(seen[i]);
            }
        } else {
            const Taxonomy* tax = d.schema->taxonomy_for(attr);
            if (!tax) throw Error("describe_gamma: no taxonomy for '" + attr.name + "'");
            desc = "categorical hierarchy ";
            const auto levels = tax->levels();
            for (std::size_t lv = 0; lv < levels.size(); ++lv) {
                if (lv) desc += " | ";
                desc += "level " + std::to_string(lv) + ": ";
                for (std::size_t i = 0; i < levels[lv].size(); ++i) {
                    if (i) desc += ", ";
                    desc += levels[lv][i];
                }
            }
        }
        g.entries.emplace_back(attr.name, std::move(desc));
    }
    return g;
}

inline RenderedPrompt render_context_prompt(const Dataset& d_anon) {
    if (d_anon.provenance.kind != Provenance::Kind::anonymized)
        throw Error("render_context_prompt: dataset is not anonymized");
    if (d_anon.n() == 0) throw Error("render_context_prompt: dataset has no records");
    using namespace prompt_text;
    RenderedPrompt p;
    p.kind = PromptKind::context_understanding;
    p.embedded_dataset_csv = serialize_csv(d_anon);
    const std::string slot = inline_dataset(p.embedded_dataset_csv);
    p.slot_values[std::string(kDataset)] = slot;
    p.text.append(kContextBefore).append(slot).append(kContextAfter);
    p.template_length = p.text.size();
    p.text.append(kContextFormat);
    return p;
}

inline RenderedPrompt render_augmentation_prompt(const Dataset& d_anon, int k, std::string_view sensitive,
                                                 const GammaSpec& gamma, std::size_t requested_records = 0) {
    using namespace prompt_text;
    if (k < 2) throw Error("render_augmentation_prompt: k must be >= 2");
    const auto s = d_anon.schema->index_of(sensitive);
    if (!s) throw Error("render_augmentation_prompt: unknown sensitive attribute '" + std::string(sensitive) + "'");
    for (std::size_t c : d_anon.schema->qi_indices()) {
        const auto& name = d_anon.schema->attributes[c].name;
        if (std::none_of(gamma.entries.begin(), gamma.entries.end(), [&](const auto& e) { return e.first == name; }))
            throw Error("render_augmentation_prompt: taxonomy description missing for quasi-identifier '" + name + "'");
    }

    RenderedPrompt p;
    p.kind = PromptKind::data_augmentation;
    p.embedded_dataset_csv = serialize_csv(d_anon);
    std::string gamma_text = "\n";
    for (const auto& [attr, desc] : gamma.entries) gamma_text += "- " + attr + ": " + desc + "\n";
    const std::string dataset_slot = inline_dataset(p.embedded_dataset_csv);
    const std::string k_text = std::to_string(k);

    p.slot_values[std::string(kAnonymized)] = dataset_slot;
    p.slot_values[std::string(kGamma)] = gamma_text;
    p.slot_values[std::string(kSensitive)] = std::string(sensitive);
    p.slot_values[std::string(kK)] = k_text;

    p.text.append(kAugment1).append(dataset_slot).append(kAugment2).append(gamma_text).append(kAugment3);
    p.text.append(sensitive).append(kAugment4).append(k_text).append(kAugment5);
    p.template_length = p.text.size();

    std::string header;
    for (std::size_t i = 0; i < d_anon.m(); ++i) header += (i ? "," : "") + d_anon.schema->attributes[i].name;
    p.text += "\n\nReturn the new records";
    if (requested_records > 0) p.text += " (" + std::to_string(requested_records) + " of them)";
    p.text += " as a single fenced ```csv code block whose first line is exactly this header: " + header + ".";
    return p;
}

// ---------------------------------------------------------------------------
// Response parsing

struct FencedBlock {
    std::string lang;
    std::string body;
    std::size_t begin = 0; // offset of the opening fence
    std::size_t end = 0;   // offset just past the closing fence
};

/// First ``` fenced block in the text; later blocks are ignored.
inline std::optional<FencedBlock> first_fenced_block(std::string_view text) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return std::nullopt;
    const auto line_end = text.find('\n', open);
    if (line_end == std::string_view::npos) return std::nullopt;
    auto close = text.find("```", line_end + 1);
    if (close == std::string_view::npos) return std::nullopt;
    FencedBlock b;
    b.lang = std::string(trim(text.substr(open + 3, line_end - open - 3)));
    b.body = std::string(text.substr(line_end + 1, close - line_end - 1));
    b.begin = open;
    b.end = close + 3;
    return b;
}

inline ExtractedContext parse_context_response(std::string_view response_text, const Schema& schema) {
    auto block = first_fenced_block(response_text);
    if (!block) throw ParseError("context response: no fenced block found");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(block->body);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("context response: fenced block is not JSON: ") + e.what());
    }
    ExtractedContext ctx;
    ctx.model_free_text = std::string(response_text.substr(0, block->begin)) + std::string(response_text.substr(block->end));
    if (!j.is_object()) throw ParseError("context response: expected a JSON object");

    auto note_unknown = [&](const std::string& name) {
        if (!schema.index_of(name) &&
            std::find(ctx.unknown_attributes.begin(), ctx.unknown_attributes.end(), name) == ctx.unknown_attributes.end())
            ctx.unknown_attributes.push_back(name);
    };
    if (j.contains("quasi_identifiers") && j["quasi_identifiers"].is_array()) {
        for (const auto& q : j["quasi_identifiers"]) {
            ExtractedContext::QuasiIdentifier qi;
            if (q.is_string()) {
                qi.attribute = q.get<std::string>();
            } else if (q.is_object() && q.contains("attribute") && q["attribute"].is_string()) {
                qi.attribute = q["attribute"].get<std::string>();
                if (q.contains("taxonomy"))
                    qi.taxonomy_description = q["taxonomy"].is_string() ? q["taxonomy"].get<std::string>() : q["taxonomy"].dump();
            } else {
                throw ParseError("context response: malformed quasi_identifiers entry " + q.dump());
            }
            note_unknown(qi.attribute);
            ctx.quasi_identifiers.push_back(std::move(qi));
        }
    }
    if (!j.contains("sensitive_attribute") || !j["sensitive_attribute"].is_string())
        throw ParseError("context response: sensitive_attribute missing");
    ctx.sensitive_attribute = j["sensitive_attribute"].get<std::string>();
    if (!schema.index_of(ctx.sensitive_attribute)) {
        note_unknown(ctx.sensitive_attribute);
        std::string names;
        for (const auto& n : ctx.unknown_attributes) names += (names.empty() ? "" : ", ") + n;
        throw ParseError("context response: sensitive attribute '" + ctx.sensitive_attribute +
                         "' is not a column; unknown names: " + names);
    }
    return ctx;
}

/// Differences between what the model extracted and the configured schema.
inline std::vector<std::string> diff_context(const ExtractedContext& ctx, const Schema& schema) {
    std::vector<std::string> notes;
    std::set<std::string> extracted;
    for (const auto& q : ctx.quasi_identifiers) extracted.insert(q.attribute);
    for (const auto& a : schema.attributes) {
        if (a.is_qi() && !extracted.contains(a.name)) notes.push_back("missed quasi-identifier '" + a.name + "'");
        if (!a.is_qi() && extracted.contains(a.name)) notes.push_back("'" + a.name + "' is not a configured quasi-identifier");
    }
    for (const auto& u : ctx.unknown_attributes) notes.push_back("unknown column '" + u + "'");
    const auto s = schema.sensitive_index();
    if (s && schema.attributes[*s].name != ctx.sensitive_attribute)
        notes.push_back("sensitive attribute '" + ctx.sensitive_attribute + "' differs from configured '" +
                        schema.attributes[*s].name + "'");
    return notes;
}

struct RecordsParse {
    std::vector<Record> records;
    std::vector<std::pair<std::string, std::string>> rejected; // row text, reason
};

/// Reads the first fenced CSV block against the schema. Rows that do not fit
/// are collected as rejections.
inline RecordsParse parse_records_response(std::string_view response_text, const Schema& schema) {
    auto block = first_fenced_block(response_text);
    if (!block) throw ParseError("no parseable records: response has no fenced block");
    std::vector<csv::Row> rows;
    try {
        rows = detail::drop_blank_rows(csv::parse(block->body));
    } catch (const ParseError& e) {
        throw ParseError(std::string("no parseable records: ") + e.what());
    }
    if (rows.empty()) throw ParseError("no parseable records: fenced block is empty");

    const auto& header = rows.front();
    bool header_ok = header.size() == schema.size();
    for (std::size_t i = 0; header_ok && i < header.size(); ++i)
        header_ok = trim(header[i]) == schema.attributes[i].name;
    if (!header_ok) {
        std::string got;
        for (std::size_t i = 0; i < header.size(); ++i) got += (i ? "," : "") + header[i];
        throw ParseError("records block header '" + got + "' does not match the schema column order");
    }

    RecordsParse out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::string row_text;
        for (std::size_t i = 0; i < row.size(); ++i) row_text += (i ? "," : "") + row[i];
        if (row.size() != schema.size()) {
            out.rejected.emplace_back(row_text, "expected " + std::to_string(schema.size()) + " fields, got " +
                                                    std::to_string(row.size()));
            continue;
        }
        Record rec;
        std::optional<std::string> problem;
        for (std::size_t c = 0; c < row.size() && !problem; ++c) {
            auto parsed = parse_field(schema, c, trim(row[c]), CellMode::generalized);
            if (auto err = std::get_if<std::string>(&parsed)) problem = *err;
            else rec.values.push_back(std::get<Cell>(std::move(parsed)));
        }
        if (!problem) problem = validate_record(schema, rec);
        if (problem) {
            out.rejected.emplace_back(row_text, *problem);
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    if (out.records.empty()) throw ParseError("no parseable records: zero well-formed rows");
    return out;
}

/// Records rendered as a fenced CSV block, the shape a model is asked for.
inline std::string records_as_fenced_csv(const std::vector<Record>& records, const Schema& schema) {
    std::string body;
    csv::append_row(body, schema.names());
    for (const auto& r : records) {
        csv::Row row;
        for (const auto& c : r.values) row.push_back(render_cell(c));
        csv::append_row(body, row);
    }
    return fenced("csv", body);
}

} // namespace kanon
