#include <gtest/gtest.h>

#include <atomic>
#include <span>

#include "fixtures.hpp"
#include "json.hpp"
#include "structsql/rng.hpp"
#include "structsql/sampler.hpp"

using namespace structsql;
namespace st = structsql::testing;

namespace {

// Answers with the gold SQL for questions the predicate accepts and with a
// well-formed but wrong query otherwise.
struct ScriptedTeacher {
    std::map<std::int64_t, std::string> gold;
    std::function<bool(std::int64_t qid, const GenerationRequest&)> answers;
    std::function<bool(std::int64_t qid)> transport_fails = [](std::int64_t) { return false; };
    std::shared_ptr<std::atomic<std::size_t>> calls = std::make_shared<std::atomic<std::size_t>>(0);

    BatchResult operator()(const std::vector<GenerationRequest>& reqs) const {
        BatchResult out;
        for (std::size_t i = 0; i < reqs.size(); ++i) {
            ++*calls;
            const auto& req = reqs[i];
            GenerationRecord rec;
            rec.question_id = req.question_id;
            rec.prompt_kind = req.prompt.kind;
            rec.prompt = req.prompt.text;
            if (transport_fails(req.question_id)) {
                rec.transport_error = "HTTP 503";
                out.failures.push_back({i, req.question_id, "HTTP 503"});
            } else {
                const auto sql = answers(req.question_id, req) ? gold.at(req.question_id) : "SELECT -424242";
                rec.response = compose_response(req.prompt.kind, "Plan: read the table.", sql);
                rec.completion_tokens = 10 + req.question_id % 7;
            }
            rec.extracted = extract_output(rec.prompt_kind, rec.response);
            out.records.push_back(std::move(rec));
        }
        return out;
    }
};

class SamplerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new st::TempDir;
        synth_ = new st::SyntheticCorpus(st::make_synthetic_corpus(dir_->path(), 4, 12));
        corpus_ = new Corpus(load_corpus(synth_->task_file, synth_->db_root));
        partition_ = new CorpusPartition(partition_databases(corpus_->db_ids(), 3));
    }
    static void TearDownTestSuite() {
        delete partition_;
        delete corpus_;
        delete synth_;
        delete dir_;
    }

    static ScriptedTeacher teacher(std::function<bool(std::int64_t, const GenerationRequest&)> answers) {
        ScriptedTeacher t;
        for (const auto& task : synth_->tasks) t.gold[task.question_id] = task.gold_sql;
        t.answers = std::move(answers);
        return t;
    }

    static SplitTargets uniform(Split split, std::size_t n) {
        SplitTargets t;
        t.split = split;
        for (auto c : kAllCategories) t.per_category[c] = n;
        return t;
    }

    // Independent rendition of the admission walk: candidates in the split's
    // pool, grouped by the generator's intended category, sorted, shuffled
    // with the category seed and visited one at a time.
    static std::vector<std::int64_t> oracle_walk(Split split, const SplitTargets& targets, std::uint64_t seed,
                                                 const std::function<bool(std::int64_t)>& succeeds,
                                                 const std::set<std::int64_t>& exclude = {}) {
        const auto& pool = split == Split::OODVal ? partition_->ood_pool : partition_->id_pool;
        std::vector<std::int64_t> admitted;
        for (auto c : kAllCategories) {
            std::vector<std::int64_t> ids;
            for (const auto& t : synth_->tasks)
                if (t.category == to_string(c) && pool.count(t.db_id) && !exclude.count(t.question_id))
                    ids.push_back(t.question_id);
            std::sort(ids.begin(), ids.end());
            seeded_shuffle(std::span(ids), category_seed(seed, split, c));
            std::size_t n = 0;
            for (auto id : ids) {
                if (n >= targets.target(c)) break;
                if (succeeds(id)) {
                    admitted.push_back(id);
                    ++n;
                }
            }
        }
        return admitted;
    }

    static std::vector<std::int64_t> ids_of(const std::vector<DistillRecord>& records) {
        std::vector<std::int64_t> out;
        for (const auto& r : records) out.push_back(r.question_id);
        return out;
    }

    Executor executor() const { return Executor(synth_->db_root); }

    static st::TempDir* dir_;
    static st::SyntheticCorpus* synth_;
    static Corpus* corpus_;
    static CorpusPartition* partition_;
};

st::TempDir* SamplerTest::dir_ = nullptr;
st::SyntheticCorpus* SamplerTest::synth_ = nullptr;
Corpus* SamplerTest::corpus_ = nullptr;
CorpusPartition* SamplerTest::partition_ = nullptr;

}  // namespace

TEST_F(SamplerTest, DefaultTargets) {
    EXPECT_EQ(SplitTargets::defaults(Split::Train).total(), 1000u);
    EXPECT_EQ(SplitTargets::defaults(Split::IDVal).total(), 150u);
    EXPECT_EQ(SplitTargets::defaults(Split::OODVal).total(), 150u);
    EXPECT_EQ(SplitTargets::defaults(Split::Train).target(ComplexityCategory::JoinSetOpOnly), 398u);
    EXPECT_EQ(SplitTargets::defaults(Split::OODVal).target(ComplexityCategory::JoinSetOpAndSubquery), 13u);
}

TEST_F(SamplerTest, AllSuccessFillsEveryCategory) {
    const auto targets = uniform(Split::Train, 10);
    SamplerOptions opt;
    opt.seed = 11;
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    const auto res = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    EXPECT_EQ(ids_of(res.records), oracle_walk(Split::Train, targets, 11, [](std::int64_t) { return true; }));
    EXPECT_FALSE(res.report.has_shortfall());
    for (auto c : kAllCategories) {
        const auto& l = res.report.categories.at(c);
        EXPECT_EQ(l.admitted, 10u);
        EXPECT_EQ(l.attempted, 10u);
        EXPECT_EQ(l.pool_size, 36u);
        EXPECT_EQ(l.rejected, 0u);
    }
    EXPECT_EQ(*t.calls, 40u);
    for (const auto& r : res.records) {
        EXPECT_TRUE(partition_->id_pool.count(r.db_id));
        EXPECT_EQ(r.split, Split::Train);
        EXPECT_EQ(r.prompt_kind, PromptKind::QPCoT);
        EXPECT_EQ(r.teacher_tokens, 10 + r.question_id % 7);
        EXPECT_NE(r.prompt.find("## User Question:"), std::string::npos);
        EXPECT_NE(r.target_sequence.find("## SQL Query:"), std::string::npos);
    }
}

TEST_F(SamplerTest, AllFailureReportsShortfall) {
    const auto targets = uniform(Split::Train, 10);
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return false; });
    const auto res = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), {});
    EXPECT_TRUE(res.records.empty());
    EXPECT_TRUE(res.report.has_shortfall());
    for (const auto& [c, l] : res.report.categories) {
        EXPECT_EQ(l.attempted, l.pool_size);
        EXPECT_EQ(l.rejected, l.pool_size);
        EXPECT_EQ(l.shortfall(), 10u);
    }
    const auto j = nlohmann::json::parse(shortfall_report_json({res.report}));
    EXPECT_TRUE(j["shortfall"].get<bool>());
    EXPECT_EQ(j["splits"][0]["categories"]["SingleTable"]["shortfall"], 10);
}

TEST_F(SamplerTest, PartialSuccessMatchesSequentialWalk) {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        const auto targets = uniform(Split::IDVal, 7);
        auto ok = [seed](std::int64_t qid) { return (qid * 2654435761u + seed) % 2 == 0; };
        const auto t = teacher([&](std::int64_t qid, const GenerationRequest&) { return ok(qid); });
        SamplerOptions opt;
        opt.seed = seed;
        const auto res = build_split(*corpus_, *partition_, targets, PromptKind::UnstructuredCoT, t, executor(), opt);
        EXPECT_EQ(ids_of(res.records), oracle_walk(Split::IDVal, targets, seed, ok)) << seed;
        for (const auto& [c, l] : res.report.categories) {
            EXPECT_EQ(l.attempted, l.admitted + l.rejected + l.transport_skipped);
            EXPECT_EQ(l.retry_queries, 0u);
        }
    }
}

TEST_F(SamplerTest, TransportFailuresAreSkippedNotRejected) {
    const auto targets = uniform(Split::Train, 5);
    auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    t.transport_fails = [](std::int64_t qid) { return qid % 3 == 0; };
    const auto res = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), {});
    EXPECT_EQ(ids_of(res.records),
              oracle_walk(Split::Train, targets, 0, [](std::int64_t qid) { return qid % 3 != 0; }));
    std::size_t skipped = 0;
    for (const auto& [c, l] : res.report.categories) {
        EXPECT_EQ(l.rejected, 0u);
        skipped += l.transport_skipped;
    }
    EXPECT_GT(skipped, 0u);
}

TEST_F(SamplerTest, RetryPassUsesHigherTemperature) {
    const auto targets = uniform(Split::Train, 30);
    const auto t = teacher([](std::int64_t qid, const GenerationRequest& req) {
        return qid % 2 == 0 || req.temperature_override.value_or(0.0) > 0.5;
    });
    SamplerOptions opt;
    opt.retry_failed = true;
    opt.retry_temperature = 0.8;
    const auto res = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    for (const auto& [c, l] : res.report.categories) {
        EXPECT_EQ(l.admitted, 30u);
        EXPECT_EQ(l.attempted, 36u);
        EXPECT_GT(l.retry_queries, 0u);
        EXPECT_EQ(l.attempted, l.admitted + l.rejected + l.transport_skipped);
    }

    opt.retry_failed = false;
    const auto single = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    EXPECT_TRUE(single.report.has_shortfall());
}

TEST_F(SamplerTest, SplitsDoNotOverlap) {
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    SamplerOptions opt;
    opt.seed = 5;
    const auto train = build_split(*corpus_, *partition_, uniform(Split::Train, 20), PromptKind::QPCoT, t,
                                   executor(), opt);
    std::set<std::int64_t> used;
    for (const auto& r : train.records) used.insert(r.question_id);
    const auto idval = build_split(*corpus_, *partition_, uniform(Split::IDVal, 20), PromptKind::QPCoT, t,
                                   executor(), opt, used);
    const auto oodval = build_split(*corpus_, *partition_, uniform(Split::OODVal, 5), PromptKind::QPCoT, t,
                                    executor(), opt, used);
    for (const auto& r : idval.records) EXPECT_FALSE(used.count(r.question_id));
    for (const auto& [c, l] : idval.report.categories) {
        EXPECT_EQ(l.pool_size, 16u);
        EXPECT_EQ(l.shortfall(), 4u);
    }
    for (const auto& r : oodval.records) EXPECT_TRUE(partition_->ood_pool.count(r.db_id));
    EXPECT_EQ(oodval.records.size(), 20u);
    EXPECT_EQ(ids_of(idval.records),
              oracle_walk(Split::IDVal, uniform(Split::IDVal, 20), 5, [](std::int64_t) { return true; }, used));
}

TEST_F(SamplerTest, DeterministicAcrossRunsAndSensitiveToSeed) {
    const auto t = teacher([](std::int64_t qid, const GenerationRequest&) { return qid % 4 != 1; });
    const auto targets = uniform(Split::Train, 8);
    SamplerOptions opt;
    opt.seed = 21;
    st::TempDir out;
    const auto a = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    const auto b = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    emit_dataset(a.records, a.report, "teacher", out.path() / "a.jsonl");
    emit_dataset(b.records, b.report, "teacher", out.path() / "b.jsonl");
    EXPECT_EQ(st::read_file(out.path() / "a.jsonl"), st::read_file(out.path() / "b.jsonl"));
    EXPECT_EQ(st::read_file(out.path() / "a.jsonl.manifest.json"), st::read_file(out.path() / "b.jsonl.manifest.json"));

    opt.seed = 22;
    const auto c = build_split(*corpus_, *partition_, targets, PromptKind::QPCoT, t, executor(), opt);
    EXPECT_NE(ids_of(a.records), ids_of(c.records));
}

TEST_F(SamplerTest, EmitAndLoadRoundTrip) {
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    SamplerOptions opt;
    opt.seed = 8;
    const auto res = build_split(*corpus_, *partition_, uniform(Split::IDVal, 3), PromptKind::QPCoT, t, executor(),
                                 opt);
    st::TempDir out;
    const auto path = out.path() / "idval.jsonl";
    emit_dataset(res.records, res.report, "teacher-x", path);
    EXPECT_EQ(load_dataset(path), res.records);
    const auto m = load_manifest(manifest_path(path));
    EXPECT_EQ(m.split, Split::IDVal);
    EXPECT_EQ(m.kind, PromptKind::QPCoT);
    EXPECT_EQ(m.seed, 8u);
    EXPECT_EQ(m.model_name, "teacher-x");
    EXPECT_EQ(m.record_count, 12u);
    EXPECT_FALSE(m.anti_overlap_policy.empty());
    EXPECT_EQ(m.categories.at(ComplexityCategory::SubqueryOnly).admitted, 3u);

    const auto line = st::read_file(path).substr(0, st::read_file(path).find('\n'));
    const auto j = nlohmann::json::parse(line);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"category", "db_id", "prompt", "prompt_kind", "question_id", "split",
                                              "target_sequence", "teacher_tokens"}));
    EXPECT_EQ(j["prompt_kind"], "qpcot");
}

TEST_F(SamplerTest, RecordsConformToTheTrainerSchema) {
    const auto schema = nlohmann::json::parse(st::read_file(STRUCTSQL_RECORD_SCHEMA));
    const auto& props = schema.at("properties");
    const auto t = teacher([](std::int64_t qid, const GenerationRequest&) { return qid % 2 == 0; });
    for (const auto kind : {PromptKind::QPCoT, PromptKind::UnstructuredCoT, PromptKind::FNGoldDirect}) {
        const auto res = build_split(*corpus_, *partition_, uniform(Split::Train, 2), kind, t, executor(), {});
        ASSERT_FALSE(res.records.empty());
        for (const auto& r : res.records) {
            const auto j = nlohmann::ordered_json::parse(record_to_json(r));
            std::vector<std::string> keys;
            for (const auto& [k, v] : j.items()) {
                keys.push_back(k);
                ASSERT_TRUE(props.contains(k)) << k;
                const auto& p = props.at(k);
                if (p.contains("enum")) {
                    EXPECT_NE(std::find(p["enum"].begin(), p["enum"].end(), v), p["enum"].end()) << k << "=" << v;
                } else if (p["type"] == "integer") {
                    EXPECT_TRUE(v.is_number_integer()) << k;
                } else {
                    EXPECT_TRUE(v.is_string()) << k;
                }
            }
            EXPECT_EQ(keys, schema.at("required").get<std::vector<std::string>>());
        }
    }
}

TEST_F(SamplerTest, EmptyDatasetStillGetsAManifest) {
    st::TempDir out;
    SamplingReport report;
    report.split = Split::OODVal;
    report.categories[ComplexityCategory::SingleTable].target = 4;
    emit_dataset({}, report, "m", out.path() / "empty.jsonl");
    EXPECT_EQ(st::read_file(out.path() / "empty.jsonl"), "");
    const auto m = load_manifest(out.path() / "empty.jsonl.manifest.json");
    EXPECT_EQ(m.record_count, 0u);
    EXPECT_EQ(m.categories.size(), 4u);
    EXPECT_EQ(m.categories.at(ComplexityCategory::SingleTable).shortfall(), 4u);
    EXPECT_THROW(emit_dataset({}, report, "m", out.path() / "missing" / "dir" / "x.jsonl"), Error);
    EXPECT_THROW(record_from_json("{\"question_id\": 1}"), Error);
}

TEST_F(SamplerTest, VerifyDatasetRechecksEveryRecord) {
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    const auto res = build_split(*corpus_, *partition_, uniform(Split::Train, 4), PromptKind::QPCoT, t, executor(), {});
    const auto good = verify_dataset(res.records, *corpus_, executor(), partition_);
    EXPECT_TRUE(good.ok());
    EXPECT_EQ(good.checked, 16u);

    auto bad = res.records;
    bad[0].target_sequence = compose_response(PromptKind::QPCoT, "x", "SELECT -1");
    bad[1].question_id = 999999;
    bad[2].split = Split::OODVal;
    bad[3].db_id = "shop_99";
    const auto rep = verify_dataset(bad, *corpus_, executor(), partition_);
    EXPECT_FALSE(rep.ok());
    EXPECT_EQ(rep.failures.size(), 4u);
    EXPECT_EQ(rep.matched, 12u);
}

TEST_F(SamplerTest, GoldDirectNeverCallsTheTeacher) {
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return false; });
    const auto res = build_split(*corpus_, *partition_, uniform(Split::Train, 6), PromptKind::FNGoldDirect, t,
                                 executor(), {});
    EXPECT_EQ(*t.calls, 0u);
    ASSERT_EQ(res.records.size(), 24u);
    std::map<std::int64_t, std::string> gold;
    for (const auto& task : synth_->tasks) gold[task.question_id] = task.gold_sql;
    for (const auto& r : res.records) {
        EXPECT_EQ(r.target_sequence, gold.at(r.question_id));
        EXPECT_EQ(r.teacher_tokens, 0);
        EXPECT_EQ(r.prompt_kind, PromptKind::FNGoldDirect);
    }
    EXPECT_TRUE(verify_dataset(res.records, *corpus_, executor(), partition_).ok());
}

TEST_F(SamplerTest, TeacherMustAnswerEveryRequest) {
    const TeacherFn broken = [](const std::vector<GenerationRequest>&) { return BatchResult{}; };
    EXPECT_THROW(
        build_split(*corpus_, *partition_, uniform(Split::Train, 2), PromptKind::QPCoT, broken, executor(), {}),
        Error);
}

TEST_F(SamplerTest, UnparseableGoldIsCountedAndSkipped) {
    Corpus c = *corpus_;
    c.tasks[0].gold_sql = "SELECT x FROM items WHERE (";
    const auto t = teacher([](std::int64_t, const GenerationRequest&) { return true; });
    CorpusPartition all = *partition_;
    all.id_pool.insert(all.ood_pool.begin(), all.ood_pool.end());
    const auto res = build_split(c, all, uniform(Split::Train, 1), PromptKind::QPCoT, t, executor(), {});
    EXPECT_EQ(res.report.unparseable_gold, 1u);
}

TEST(CategorySeed, DistinctAcrossSplitsAndCategories) {
    std::set<std::uint64_t> seen;
    for (auto s : {Split::Train, Split::IDVal, Split::OODVal})
        for (auto c : kAllCategories) seen.insert(category_seed(7, s, c));
    EXPECT_EQ(seen.size(), 12u);
    EXPECT_NE(category_seed(7, Split::Train, ComplexityCategory::SingleTable),
              category_seed(8, Split::Train, ComplexityCategory::SingleTable));
}
