#include <gtest/gtest.h>

#include "stub_server.hpp"
#include "test_util.hpp"

namespace kanon {
namespace {

using testing::StubServer;

Dataset small_anonymized() {
    const auto d = testing::city_dataset("20,Milan,Flu\n30,Turin,Cold\n60,Bari,Flu\n70,Naples,Cancer\n");
    return mondrian_anonymize(d, 2).output;
}

Record rec(const Schema& schema, const std::string& row) {
    const auto parsed = parse_records_response("```csv\nage,city,disease\n" + row + "\n```", schema);
    return parsed.records.at(0);
}

struct ScriptedBackend {
    std::vector<std::string> answers;
    int calls = 0;
    GenerationResult generate(const GenerationRequest& r) {
        GenerationResult out;
        auto parsed = parse_records_response(answers.at(std::min<std::size_t>(calls++, answers.size() - 1)),
                                             *r.anonymized->schema);
        out.batch.records = std::move(parsed.records);
        out.batch.rejected_rows = std::move(parsed.rejected);
        return out;
    }
};

struct FailingBackend {
    int calls = 0;
    GenerationResult generate(const GenerationRequest&) {
        ++calls;
        throw BackendError("endpoint down");
    }
};

TEST(ValidateBatch, Reasons) {
    const auto d = small_anonymized();
    GenerationBatch batch;
    batch.records = {rec(*d.schema, "20-30,Northern Italy,Flu"), rec(*d.schema, "20-30,Northern Italy,Ebola"),
                     rec(*d.schema, "40-50,Northern Italy,Flu")};
    batch.records.push_back(Record{{Cell{20.0}, Cell{std::string("Milan")}}});

    const auto strict = validate_batch(batch, d, {});
    ASSERT_EQ(strict.accepted.size(), 1u);
    ASSERT_EQ(strict.rejected.size(), 3u);
    EXPECT_EQ(strict.rejected[0].second, "unseen sensitive value 'Ebola'");
    EXPECT_EQ(strict.rejected[1].second, "new QI signature");
    EXPECT_EQ(strict.rejected[2].second.rfind("schema: ", 0), 0u);

    const auto permissive = validate_batch(batch, d, {ValidationPolicy::Mode::permissive, 3});
    EXPECT_EQ(permissive.accepted.size(), 2u);
    EXPECT_EQ(permissive.rejected.size(), 2u);
}

TEST(AugmentAndMerge, SynthNeverLowersK) {
    Rng rng(81);
    for (int trial = 0; trial < 40; ++trial) {
        const auto d = testing::city_dataset(testing::random_city_body(rng, 10 + rng.index(80)));
        const int k = 2 + static_cast<int>(rng.index(4));
        const auto anon = anonymize(d, Algorithm::cba, k, rng.next()).output;
        SynthBackend backend;
        const auto o = augment_and_merge(anon, k, backend, {0, rng.next(), {}});
        EXPECT_GE(o.post_k, o.pre_k);
        EXPECT_EQ(o.merged.n(), anon.n() + o.accepted_records);
        EXPECT_EQ(o.accepted_records, default_generation_count(anon.n()));
        EXPECT_NE(o.cell.kind, ReportCell::Kind::less);
        ASSERT_GE(o.merged.n(), anon.n());
        EXPECT_TRUE(std::equal(anon.records.begin(), anon.records.end(), o.merged.records.begin()));
        EXPECT_EQ(o.merged.provenance.kind, Provenance::Kind::merged);
    }
}

TEST(AugmentAndMerge, StrictRejectsNovelRecordAndKeepsAnonymizedData) {
    const auto d = small_anonymized();
    StubServer s([](auto&, auto& res, int call) {
        if (call % 2 == 0) StubServer::reply(res, "Sure.");
        else StubServer::reply(res, "```csv\nage,city,disease\n40-50,Southern Italy,Flu\n```");
    });
    ::setenv("KANON_TEST_KEY", "secret", 1);
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::remote_llm;
    cfg.endpoint_url = s.url();
    cfg.model_name = "stub";
    cfg.api_key_env = "KANON_TEST_KEY";
    cfg.backoff_initial_ms = 1;
    RemoteLlmBackend backend{cfg};

    const auto o = augment_and_merge(d, 2, backend, {1, 0, {}});
    EXPECT_EQ(o.accepted_records, 0u);
    EXPECT_EQ(o.merged.records, d.records);
    EXPECT_EQ(o.post_k, 2u);
    EXPECT_EQ(o.cell.text(), "=");
    EXPECT_EQ(o.attempts, 3);
    ASSERT_FALSE(o.rejections.empty());
    EXPECT_EQ(o.rejections.back().second, "new QI signature");
    EXPECT_FALSE(o.context_notes.empty()); // "Sure." carries no fenced block
}

TEST(AugmentAndMerge, PermissiveReportsTheDrop) {
    const auto d = small_anonymized();
    ScriptedBackend backend{{"```csv\nage,city,disease\n40-50,Southern Italy,Flu\n```"}};
    const auto o = augment_and_merge(d, 2, backend, {1, 0, {ValidationPolicy::Mode::permissive, 2}});
    EXPECT_EQ(backend.calls, 2);
    EXPECT_EQ(o.attempts, 2);
    EXPECT_EQ(o.cell.text(), "<(1)");

    const auto dir = std::filesystem::temp_directory_path() / "kanon_pipeline_permissive";
    std::filesystem::remove_all(dir);
    write_run_directory(o, dir);
    for (const char* f : {"context_prompt.txt", "augmentation_prompt.txt", "generated.csv", "merged.csv", "outcome.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto back = load_dataset(read_file(dir / "merged.csv"), config_of(*d.schema), CellMode::generalized);
    std::size_t min_class = back.n();
    for (const auto& a : back.records) {
        std::size_t same = 0;
        for (const auto& b : back.records) same += a.values[0] == b.values[0] && a.values[1] == b.values[1];
        min_class = std::min(min_class, same);
    }
    EXPECT_EQ(min_class, 1u);
    const auto outcome = nlohmann::json::parse(read_file(dir / "outcome.json"));
    EXPECT_EQ(outcome["cell"], "<(1)");
    EXPECT_EQ(outcome["attempt_log"].size(), 2u);
}

TEST(AugmentAndMerge, PermissiveStopsOnceKHolds) {
    const auto d = small_anonymized();
    ScriptedBackend backend{{"```csv\nage,city,disease\n20-30,Northern Italy,Flu\n```"}};
    const auto o = augment_and_merge(d, 2, backend, {1, 0, {ValidationPolicy::Mode::permissive, 3}});
    EXPECT_EQ(backend.calls, 1);
    EXPECT_EQ(o.post_k, 2u);
}

TEST(AugmentAndMerge, Errors) {
    const auto d = small_anonymized();
    SynthBackend synth;
    EXPECT_THROW(augment_and_merge(d, 1, synth, {}), Error);
    EXPECT_THROW(augment_and_merge(Dataset{d.schema, {}, d.provenance}, 2, synth, {}), Error);
    FailingBackend failing;
    EXPECT_THROW(augment_and_merge(d, 2, failing, {}), BackendError);
    EXPECT_EQ(failing.calls, 3);
}

} // namespace
} // namespace kanon
