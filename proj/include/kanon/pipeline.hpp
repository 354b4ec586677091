#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "kanon/audit.hpp"
#include "kanon/backends.hpp"
#include "kanon/prompt_engine.hpp"

namespace kanon {

struct ValidationPolicy {
    enum class Mode { strict, permissive };
    Mode mode = Mode::strict;
    int max_attempts = 3;
};

inline ValidationPolicy::Mode parse_policy_mode(std::string_view s) {
    if (s == "strict") return ValidationPolicy::Mode::strict;
    if (s == "permissive") return ValidationPolicy::Mode::permissive;
    throw Error("unknown policy '" + std::string(s) + "' (expected strict or permissive)");
}

struct Validation {
    std::vector<Record> accepted;
    std::vector<std::pair<Record, std::string>> rejected;
};

/// Strict mode only admits records whose quasi-identifier signature already
/// names a class of d_anon. Both modes require a sensitive value that occurs
/// in d_anon.
inline Validation validate_batch(const GenerationBatch& batch, const Dataset& d_anon, const ValidationPolicy& policy) {
    const Schema& schema = *d_anon.schema;
    std::set<std::vector<std::string>> signatures;
    for (auto& c : equivalence_classes(d_anon)) signatures.insert(std::move(c.signature));
    const auto s = schema.sensitive_index();
    std::unordered_set<std::string> sensitive_values;
    if (s)
        for (const auto& r : d_anon.records) sensitive_values.insert(render_cell(r.values[*s]));

    Validation v;
    for (const auto& rec : batch.records) {
        if (auto problem = validate_record(schema, rec)) {
            v.rejected.emplace_back(rec, "schema: " + *problem);
            continue;
        }
        if (s && !sensitive_values.contains(render_cell(rec.values[*s]))) {
            v.rejected.emplace_back(rec, "unseen sensitive value '" + render_cell(rec.values[*s]) + "'");
            continue;
        }
        if (policy.mode == ValidationPolicy::Mode::strict && !signatures.contains(qi_signature(schema, rec))) {
            v.rejected.emplace_back(rec, "new QI signature");
            continue;
        }
        v.accepted.push_back(rec);
    }
    return v;
}

struct AttemptLog {
    std::optional<std::string> raw_response;
    std::optional<std::string> context_response;
    std::vector<std::string> request_bodies;
    std::vector<std::string> log;
    std::size_t generated = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t post_k = 0;
    std::optional<std::string> error;
};

struct MergeOutcome {
    Dataset merged;
    std::size_t pre_k = 0;
    std::size_t post_k = 0;
    int requested_k = 0;
    ReportCell cell;
    std::size_t accepted_records = 0;
    std::size_t rejected_records = 0;
    int attempts = 0;

    std::vector<Record> generated;  // accepted records of the final attempt
    std::vector<std::pair<std::string, std::string>> rejections; // row text, reason
    RenderedPrompt context_prompt;
    RenderedPrompt augmentation_prompt;
    std::vector<std::string> context_notes;
    std::vector<AttemptLog> attempt_logs;
};

struct AugmentOptions {
    std::size_t count = 0; // 0 picks ceil(n / 10)
    std::uint64_t seed = 0;
    ValidationPolicy policy;
};

inline std::size_t default_generation_count(std::size_t n) { return n == 0 ? 1 : (n + 9) / 10; }

namespace detail {

inline std::string row_text(const Record& r) {
    std::string out;
    for (std::size_t i = 0; i < r.values.size(); ++i) out += (i ? "," : "") + render_cell(r.values[i]);
    return out;
}

} // namespace detail

/// anonymized -> prompts -> generate -> validate -> merge -> re-audit.
///
/// Strict mode retries only when nothing was accepted. Permissive mode also
/// retries, with a fresh batch, when the merge falls below the requested k;
/// the last attempt is kept with its true cell.
template <GenerationBackend Backend>
MergeOutcome augment_and_merge(const Dataset& d_anon, int requested_k, Backend& backend, const AugmentOptions& options) {
    if (d_anon.n() == 0) throw Error("augment_and_merge: empty dataset");
    if (requested_k < 2) throw Error("augment_and_merge: requested k must be >= 2");
    if (options.policy.max_attempts < 1) throw Error("augment_and_merge: max_attempts must be >= 1");
    const Schema& schema = *d_anon.schema;
    const auto s = schema.sensitive_index();
    if (!s) throw Error("augment_and_merge: dataset has no sensitive attribute");

    MergeOutcome out;
    out.requested_k = requested_k;
    out.pre_k = calc_k(d_anon);
    const std::size_t count = options.count ? options.count : default_generation_count(d_anon.n());
    out.context_prompt = render_context_prompt(d_anon);
    out.augmentation_prompt =
        render_augmentation_prompt(d_anon, requested_k, schema.attributes[*s].name, describe_gamma(d_anon), count);

    bool have_outcome = false;
    std::string last_error;
    for (int attempt = 0; attempt < options.policy.max_attempts; ++attempt) {
        AttemptLog alog;
        GenerationRequest req{&d_anon, &out.context_prompt, &out.augmentation_prompt, count, options.seed, attempt};
        GenerationResult result;
        try {
            result = backend.generate(req);
        } catch (const Error& e) {
            alog.error = e.what();
            last_error = e.what();
            out.attempt_logs.push_back(std::move(alog));
            out.attempts = attempt + 1;
            continue;
        }
        alog.raw_response = result.batch.raw_response;
        alog.context_response = result.context_response;
        alog.request_bodies = result.request_log;
        alog.log = result.batch.log;
        alog.generated = result.batch.records.size();

        if (result.context_response) {
            out.context_notes.clear();
            try {
                out.context_notes = diff_context(parse_context_response(*result.context_response, schema), schema);
            } catch (const Error& e) {
                out.context_notes.push_back(std::string("context response unusable: ") + e.what());
            }
        }

        auto validation = validate_batch(result.batch, d_anon, options.policy);
        Dataset merged{d_anon.schema, d_anon.records, Provenance::merged()};
        merged.records.insert(merged.records.end(), validation.accepted.begin(), validation.accepted.end());

        out.attempts = attempt + 1;
        out.merged = std::move(merged);
        out.post_k = calc_k(out.merged);
        out.accepted_records = validation.accepted.size();
        out.rejected_records = validation.rejected.size() + result.batch.rejected_rows.size();
        out.generated = std::move(validation.accepted);
        out.rejections = result.batch.rejected_rows;
        for (const auto& [rec, why] : validation.rejected) out.rejections.emplace_back(detail::row_text(rec), why);
        out.cell = compare_cell(static_cast<std::size_t>(requested_k), out.post_k);
        have_outcome = true;

        alog.accepted = out.accepted_records;
        alog.rejected = out.rejected_records;
        alog.post_k = out.post_k;
        out.attempt_logs.push_back(std::move(alog));

        const bool nothing_accepted = out.accepted_records == 0;
        const bool short_of_k = out.post_k < static_cast<std::size_t>(requested_k);
        if (options.policy.mode == ValidationPolicy::Mode::strict ? !nothing_accepted : !(nothing_accepted || short_of_k))
            break;
    }
    if (!have_outcome) throw BackendError("augment_and_merge: backend failed on every attempt: " + last_error);
    return out;
}

inline nlohmann::json to_json(const MergeOutcome& o) {
    return {{"requested_k", o.requested_k},
            {"pre_k", o.pre_k},
            {"post_k", o.post_k},
            {"cell", o.cell.text()},
            {"accepted_records", o.accepted_records},
            {"rejected_records", o.rejected_records},
            {"attempts", o.attempts},
            {"merged_records", o.merged.n()},
            {"context_notes", o.context_notes}};
}

/// Writes prompts, raw responses, the generated and merged CSVs and the
/// outcome JSON into `dir`.
inline void write_run_directory(const MergeOutcome& o, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "context_prompt.txt", o.context_prompt.text);
    write_file(dir / "augmentation_prompt.txt", o.augmentation_prompt.text);
    Dataset generated{o.merged.schema, o.generated, Provenance::merged()};
    write_file(dir / "generated.csv", serialize_csv(generated));
    write_file(dir / "merged.csv", serialize_csv(o.merged));

    nlohmann::json attempts = nlohmann::json::array();
    for (std::size_t i = 0; i < o.attempt_logs.size(); ++i) {
        const auto& a = o.attempt_logs[i];
        const auto tag = "attempt" + std::to_string(i + 1);
        if (a.raw_response) write_file(dir / (tag + "_response.json"), *a.raw_response);
        if (a.context_response) write_file(dir / (tag + "_context_response.txt"), *a.context_response);
        for (std::size_t r = 0; r < a.request_bodies.size(); ++r)
            write_file(dir / (tag + "_request" + std::to_string(r + 1) + ".json"), a.request_bodies[r]);
        nlohmann::json aj{{"generated", a.generated}, {"accepted", a.accepted}, {"rejected", a.rejected},
                          {"post_k", a.post_k}, {"log", a.log}};
        aj["error"] = a.error ? nlohmann::json(*a.error) : nlohmann::json(nullptr);
        attempts.push_back(std::move(aj));
    }
    nlohmann::json rejections = nlohmann::json::array();
    for (const auto& [row, why] : o.rejections) rejections.push_back({{"row", row}, {"reason", why}});
    auto j = to_json(o);
    j["attempt_log"] = attempts;
    j["rejections"] = rejections;
    write_file(dir / "outcome.json", j.dump(2) + "\n");
}

} // namespace kanon
