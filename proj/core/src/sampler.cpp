#include "structsql/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <span>
#include <unordered_map>

#include "json.hpp"
#include "structsql/log.hpp"
#include "structsql/promptforge.hpp"
#include "structsql/rng.hpp"
#include "structsql/sqlstruct.hpp"

namespace structsql {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kAntiOverlapPolicy =
    "Train and IDVal draw from the in-domain database pool and never share a question_id; "
    "OODVal draws only from out-of-domain databases";

std::string dump(const ojson& j, int indent = -1) {
    return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

template <typename E, typename Parser>
E parse_or_throw(const ojson& j, const char* field, Parser parse) {
    const auto s = j.at(field).get<std::string>();
    const auto v = parse(s);
    if (!v) throw Error(std::string("unknown ") + field + " '" + s + "'");
    return *v;
}

// Executes gold queries once per question and checks a candidate's SQL
// against them.
class AdmissionChecker {
public:
    explicit AdmissionChecker(const Executor& executor) : executor_(executor) {}

    // Empty on Match, otherwise the reason for rejection.
    std::optional<std::string> check(const TaskInstance& task, PromptKind kind, std::string_view response) {
        const auto extracted = extract_output(kind, response);
        if (!extracted.sql) return "no SQL in response";
        const auto pred = executor_.execute_sql(task.db_id, *extracted.sql);
        if (!pred.ok()) return "prediction failed: " + (pred.diagnostic.empty() ? pred.note : pred.diagnostic);
        const auto& gold = gold_outcome(task);
        if (!gold.ok()) return "gold query failed: " + (gold.diagnostic.empty() ? gold.note : gold.diagnostic);
        const auto cmp = compare_results(pred, gold);
        if (cmp.verdict != ComparisonVerdict::Match) return std::string(to_string(cmp.verdict));
        return std::nullopt;
    }

private:
    const ExecOutcome& gold_outcome(const TaskInstance& task) {
        auto it = gold_.find(task.question_id);
        if (it == gold_.end()) it = gold_.emplace(task.question_id, executor_.execute_sql(task.db_id, task.gold_sql)).first;
        return it->second;
    }

    const Executor& executor_;
    std::unordered_map<std::int64_t, ExecOutcome> gold_;
};

struct Candidate {
    const TaskInstance* task = nullptr;
    bool transport_failed = false;
};

class SplitWalker {
public:
    SplitWalker(const Corpus& corpus, PromptKind kind, const TeacherFn& teacher, const Executor& executor,
                const SamplerOptions& options, Split split)
        : corpus_(corpus), kind_(kind), teacher_(teacher), checker_(executor), options_(options), split_(split) {}

    void walk(ComplexityCategory category, std::vector<const TaskInstance*> candidates, CategoryLedger& ledger,
              std::vector<DistillRecord>& out) {
        std::vector<Candidate> failed;
        std::size_t pos = 0;
        while (ledger.admitted < ledger.target && pos < candidates.size()) {
            const std::size_t take = std::min(ledger.target - ledger.admitted, candidates.size() - pos);
            std::vector<Candidate> chunk;
            for (std::size_t i = pos; i < pos + take; ++i) chunk.push_back({candidates[i], false});
            pos += take;
            ledger.attempted += chunk.size();
            auto rejected = run_chunk(category, chunk, std::nullopt, ledger, out);
            for (auto& c : rejected) {
                (c.transport_failed ? ledger.transport_skipped : ledger.rejected)++;
                failed.push_back(c);
            }
        }

        if (!options_.retry_failed || kind_ == PromptKind::FNGoldDirect) return;
        for (int round = 0; round < options_.retry_attempts && ledger.admitted < ledger.target && !failed.empty();
             ++round) {
            std::vector<Candidate> still_failed;
            std::size_t fpos = 0;
            while (fpos < failed.size()) {
                if (ledger.admitted >= ledger.target) {
                    still_failed.insert(still_failed.end(), failed.begin() + static_cast<std::ptrdiff_t>(fpos),
                                        failed.end());
                    break;
                }
                const std::size_t take = std::min(ledger.target - ledger.admitted, failed.size() - fpos);
                std::vector<Candidate> chunk(failed.begin() + static_cast<std::ptrdiff_t>(fpos),
                                             failed.begin() + static_cast<std::ptrdiff_t>(fpos + take));
                fpos += take;
                ledger.retry_queries += chunk.size();
                const std::size_t before = out.size();
                auto again = run_chunk(category, chunk, options_.retry_temperature, ledger, out);
                // Move newly admitted candidates out of their previous bucket.
                for (std::size_t r = before; r < out.size(); ++r) {
                    for (const auto& c : chunk)
                        if (c.task->question_id == out[r].question_id) {
                            (c.transport_failed ? ledger.transport_skipped : ledger.rejected)--;
                            break;
                        }
                }
                for (auto& c : again) {
                    const auto orig = std::find_if(chunk.begin(), chunk.end(),
                                                   [&](const Candidate& k) { return k.task == c.task; });
                    if (orig->transport_failed != c.transport_failed) {
                        (orig->transport_failed ? ledger.transport_skipped : ledger.rejected)--;
                        (c.transport_failed ? ledger.transport_skipped : ledger.rejected)++;
                    }
                    still_failed.push_back(c);
                }
            }
            failed = std::move(still_failed);
        }
    }

private:
    const std::string& schema_text(const std::string& db_id) {
        auto it = schema_cache_.find(db_id);
        if (it == schema_cache_.end())
            it = schema_cache_.emplace(db_id, serialize_schema(corpus_.schema(db_id), options_.schema_style)).first;
        return it->second;
    }

    // Returns the candidates that were not admitted, in chunk order.
    std::vector<Candidate> run_chunk(ComplexityCategory category, const std::vector<Candidate>& chunk,
                                     std::optional<double> temperature, CategoryLedger& ledger,
                                     std::vector<DistillRecord>& out) {
        std::vector<Candidate> not_admitted;
        std::vector<GenerationRequest> requests;
        std::vector<std::optional<std::string>> render_errors(chunk.size());
        std::vector<std::size_t> request_slot(chunk.size(), SIZE_MAX);

        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const auto& task = *chunk[i].task;
            try {
                GenerationRequest req;
                req.question_id = task.question_id;
                req.prompt = render_prompt(kind_, schema_text(task.db_id), task.question, task.hint);
                req.temperature_override = temperature;
                request_slot[i] = requests.size();
                requests.push_back(std::move(req));
            } catch (const Error& e) {
                render_errors[i] = e.what();
            }
        }

        BatchResult batch;
        if (kind_ == PromptKind::FNGoldDirect) {
            for (const auto& req : requests) {
                GenerationRecord rec;
                rec.question_id = req.question_id;
                rec.prompt_kind = req.prompt.kind;
                rec.prompt = req.prompt.text;
                batch.records.push_back(std::move(rec));
            }
            for (std::size_t i = 0; i < chunk.size(); ++i)
                if (request_slot[i] != SIZE_MAX) batch.records[request_slot[i]].response = chunk[i].task->gold_sql;
        } else if (!requests.empty()) {
            batch = teacher_(requests);
            if (batch.records.size() != requests.size())
                throw Error("teacher returned " + std::to_string(batch.records.size()) + " records for " +
                            std::to_string(requests.size()) + " requests");
        }

        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const auto& task = *chunk[i].task;
            if (render_errors[i]) {
                log::warn("question " + std::to_string(task.question_id) + ": prompt rejected: " + *render_errors[i]);
                not_admitted.push_back({chunk[i].task, false});
                continue;
            }
            const auto& rec = batch.records[request_slot[i]];
            if (rec.transport_error) {
                log::warn("question " + std::to_string(task.question_id) + ": skipped: " + *rec.transport_error);
                not_admitted.push_back({chunk[i].task, true});
                continue;
            }
            if (const auto reason = checker_.check(task, kind_, rec.response)) {
                log::debug("question " + std::to_string(task.question_id) + ": rejected: " + *reason);
                not_admitted.push_back({chunk[i].task, false});
                continue;
            }
            DistillRecord d;
            d.question_id = task.question_id;
            d.db_id = task.db_id;
            d.prompt_kind = kind_;
            d.prompt = rec.prompt;
            d.target_sequence = rec.response;
            d.category = category;
            d.split = split_;
            d.teacher_tokens = rec.completion_tokens;
            out.push_back(std::move(d));
            ++ledger.admitted;
        }
        return not_admitted;
    }

    const Corpus& corpus_;
    PromptKind kind_;
    const TeacherFn& teacher_;
    AdmissionChecker checker_;
    const SamplerOptions& options_;
    Split split_;
    std::unordered_map<std::string, std::string> schema_cache_;
};

ojson ledger_json(const CategoryLedger& l) {
    ojson j;
    j["target"] = l.target;
    j["pool_size"] = l.pool_size;
    j["attempted"] = l.attempted;
    j["admitted"] = l.admitted;
    j["rejected"] = l.rejected;
    j["transport_skipped"] = l.transport_skipped;
    j["retry_queries"] = l.retry_queries;
    return j;
}

CategoryLedger ledger_from_json(const ojson& j) {
    CategoryLedger l;
    l.target = j.value("target", std::size_t{0});
    l.pool_size = j.value("pool_size", std::size_t{0});
    l.attempted = j.value("attempted", std::size_t{0});
    l.admitted = j.value("admitted", std::size_t{0});
    l.rejected = j.value("rejected", std::size_t{0});
    l.transport_skipped = j.value("transport_skipped", std::size_t{0});
    l.retry_queries = j.value("retry_queries", std::size_t{0});
    return l;
}

}  // namespace

std::size_t SplitTargets::total() const {
    std::size_t n = 0;
    for (const auto& [c, t] : per_category) n += t;
    return n;
}

std::size_t SplitTargets::target(ComplexityCategory c) const {
    const auto it = per_category.find(c);
    return it == per_category.end() ? 0 : it->second;
}

SplitTargets SplitTargets::defaults(Split split) {
    using C = ComplexityCategory;
    SplitTargets t;
    t.split = split;
    switch (split) {
    case Split::Train:
        t.per_category = {{C::SingleTable, 295}, {C::SubqueryOnly, 229}, {C::JoinSetOpOnly, 398},
                          {C::JoinSetOpAndSubquery, 78}};
        break;
    case Split::IDVal:
        t.per_category = {{C::SingleTable, 37}, {C::SubqueryOnly, 39}, {C::JoinSetOpOnly, 57},
                          {C::JoinSetOpAndSubquery, 17}};
        break;
    case Split::OODVal:
        t.per_category = {{C::SingleTable, 46}, {C::SubqueryOnly, 31}, {C::JoinSetOpOnly, 60},
                          {C::JoinSetOpAndSubquery, 13}};
        break;
    }
    return t;
}

bool SamplingReport::has_shortfall() const {
    return std::any_of(categories.begin(), categories.end(), [](const auto& kv) { return kv.second.shortfall() > 0; });
}

TeacherFn endpoint_teacher(const EndpointConfig& config) {
    return [config](const std::vector<GenerationRequest>& requests) { return generate_batch(config, requests); };
}

std::uint64_t category_seed(std::uint64_t seed, Split split, ComplexityCategory category) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (1 + static_cast<std::uint64_t>(split) * 4 +
                                                       static_cast<std::uint64_t>(category));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SplitResult build_split(const Corpus& corpus, const CorpusPartition& partition, const SplitTargets& targets,
                        PromptKind kind, const TeacherFn& teacher, const Executor& executor,
                        const SamplerOptions& options, const std::set<std::int64_t>& exclude_question_ids) {
    SplitResult result;
    auto& report = result.report;
    report.split = targets.split;
    report.kind = kind;
    report.seed = options.seed;

    const auto& pool = targets.split == Split::OODVal ? partition.ood_pool : partition.id_pool;
    std::map<ComplexityCategory, std::vector<const TaskInstance*>> by_category;
    std::set<std::int64_t> seen;
    for (const auto& task : corpus.tasks) {
        if (!pool.count(task.db_id) || exclude_question_ids.count(task.question_id)) continue;
        if (!seen.insert(task.question_id).second) {
            log::warn("question_id " + std::to_string(task.question_id) + " appears more than once; keeping the first");
            continue;
        }
        try {
            by_category[classify_complexity(profile_sql(task.gold_sql))].push_back(&task);
        } catch (const sql::ParseError& e) {
            ++report.unparseable_gold;
            log::warn("question " + std::to_string(task.question_id) + ": gold SQL not classifiable: " + e.what());
        }
    }

    SplitWalker walker(corpus, kind, teacher, executor, options, targets.split);
    for (const auto category : kAllCategories) {
        auto& ledger = report.categories[category];
        ledger.target = targets.target(category);
        auto candidates = std::move(by_category[category]);
        ledger.pool_size = candidates.size();
        std::sort(candidates.begin(), candidates.end(),
                  [](const TaskInstance* a, const TaskInstance* b) { return a->question_id < b->question_id; });
        seeded_shuffle(std::span(candidates), category_seed(options.seed, targets.split, category));
        walker.walk(category, std::move(candidates), ledger, result.records);
        if (ledger.shortfall() > 0)
            log::warn(std::string(to_string(targets.split)) + "/" + std::string(to_string(category)) + ": admitted " +
                      std::to_string(ledger.admitted) + " of " + std::to_string(ledger.target) + " after " +
                      std::to_string(ledger.attempted) + " candidates");
    }
    return result;
}

std::string record_to_json(const DistillRecord& r) {
    ojson j;
    j["question_id"] = r.question_id;
    j["db_id"] = r.db_id;
    j["prompt_kind"] = to_string(r.prompt_kind);
    j["prompt"] = r.prompt;
    j["target_sequence"] = r.target_sequence;
    j["category"] = to_string(r.category);
    j["split"] = to_string(r.split);
    j["teacher_tokens"] = r.teacher_tokens;
    return dump(j);
}

DistillRecord record_from_json(std::string_view line) {
    try {
        const auto j = ojson::parse(line);
        DistillRecord r;
        r.question_id = j.at("question_id").get<std::int64_t>();
        r.db_id = j.at("db_id").get<std::string>();
        r.prompt_kind = parse_or_throw<PromptKind>(j, "prompt_kind", parse_prompt_kind);
        r.prompt = j.at("prompt").get<std::string>();
        r.target_sequence = j.at("target_sequence").get<std::string>();
        r.category = parse_or_throw<ComplexityCategory>(j, "category", parse_category);
        r.split = parse_or_throw<Split>(j, "split", parse_split);
        r.teacher_tokens = j.at("teacher_tokens").get<std::int64_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed dataset record: ") + e.what());
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path) {
    auto p = dataset_path;
    p += ".manifest.json";
    return p;
}

void emit_dataset(const std::vector<DistillRecord>& records, const SamplingReport& report,
                  const std::string& model_name, const std::filesystem::path& path) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write dataset '" + path.string() + "'");
        for (const auto& r : records) out << record_to_json(r) << '\n';
        if (!out) throw Error("write failed for '" + path.string() + "'");
    }

    ojson m;
    m["split"] = to_string(report.split);
    m["prompt_kind"] = to_string(report.kind);
    m["seed"] = report.seed;
    m["model_name"] = model_name;
    m["record_count"] = records.size();
    m["anti_overlap_policy"] = kAntiOverlapPolicy;
    ojson targets = ojson::object();
    ojson cats = ojson::object();
    for (const auto c : kAllCategories) {
        const auto it = report.categories.find(c);
        const CategoryLedger l = it == report.categories.end() ? CategoryLedger{} : it->second;
        targets[std::string(to_string(c))] = l.target;
        cats[std::string(to_string(c))] = ledger_json(l);
    }
    m["targets"] = targets;
    m["categories"] = cats;
    m["unparseable_gold"] = report.unparseable_gold;

    const auto mpath = manifest_path(path);
    std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest '" + mpath.string() + "'");
    out << dump(m, 2) << '\n';
    if (!out) throw Error("write failed for '" + mpath.string() + "'");
}

std::vector<DistillRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read dataset '" + path.string() + "'");
    std::vector<DistillRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(line));
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read manifest '" + path.string() + "'");
    try {
        const auto j = ojson::parse(in);
        DatasetManifest m;
        m.split = parse_or_throw<Split>(j, "split", parse_split);
        m.kind = parse_or_throw<PromptKind>(j, "prompt_kind", parse_prompt_kind);
        m.seed = j.at("seed").get<std::uint64_t>();
        m.model_name = j.value("model_name", std::string());
        m.record_count = j.at("record_count").get<std::size_t>();
        m.anti_overlap_policy = j.value("anti_overlap_policy", std::string());
        for (const auto& [name, v] : j.at("categories").items()) {
            const auto c = parse_category(name);
            if (!c) throw Error("unknown category '" + name + "' in manifest");
            m.categories[*c] = ledger_from_json(v);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed manifest '" + path.string() + "': " + e.what());
    }
}

std::string shortfall_report_json(const std::vector<SamplingReport>& reports) {
    ojson j;
    bool any = false;
    ojson splits = ojson::array();
    for (const auto& r : reports) {
        ojson s;
        s["split"] = to_string(r.split);
        ojson cats = ojson::object();
        for (const auto& [c, l] : r.categories) {
            ojson e;
            e["target"] = l.target;
            e["admitted"] = l.admitted;
            e["shortfall"] = l.shortfall();
            e["pool_size"] = l.pool_size;
            e["attempted"] = l.attempted;
            cats[std::string(to_string(c))] = e;
        }
        s["categories"] = cats;
        any = any || r.has_shortfall();
        splits.push_back(s);
    }
    j["shortfall"] = any;
    j["splits"] = splits;
    return dump(j, 2);
}

VerificationReport verify_dataset(const std::vector<DistillRecord>& records, const Corpus& corpus,
                                  const Executor& executor, const CorpusPartition* partition) {
    std::unordered_map<std::int64_t, const TaskInstance*> by_id;
    for (const auto& t : corpus.tasks) by_id.emplace(t.question_id, &t);

    AdmissionChecker checker(executor);
    VerificationReport report;
    for (const auto& r : records) {
        ++report.checked;
        const auto it = by_id.find(r.question_id);
        if (it == by_id.end()) {
            report.failures.push_back({r.question_id, "question_id not in corpus"});
            continue;
        }
        const auto& task = *it->second;
        if (task.db_id != r.db_id) {
            report.failures.push_back({r.question_id, "db_id " + r.db_id + " differs from corpus " + task.db_id});
            continue;
        }
        if (partition) {
            const auto& pool = r.split == Split::OODVal ? partition->ood_pool : partition->id_pool;
            if (!pool.count(r.db_id)) {
                report.failures.push_back(
                    {r.question_id, "db_id " + r.db_id + " outside the pool for " + std::string(to_string(r.split))});
                continue;
            }
        }
        if (const auto reason = checker.check(task, r.prompt_kind, r.target_sequence)) {
            report.failures.push_back({r.question_id, *reason});
            continue;
        }
        ++report.matched;
    }
    return report;
}

}  // namespace structsql
