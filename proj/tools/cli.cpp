#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "structsql/analytics.hpp"
#include "structsql/corpus.hpp"
#include "structsql/executor.hpp"
#include "structsql/gateway.hpp"
#include "structsql/log.hpp"
#include "structsql/sampler.hpp"
#include "structsql/sqlstruct.hpp"

namespace structsql::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Overrides {
    std::string config;
    std::string tasks;
    std::string db_root;
    std::string out;
    std::string partition;
    std::string kind;
    std::string role = "student";
    std::string base_url;
    std::string model;
    std::optional<std::uint64_t> seed;
    std::optional<double> timeout_s;
    std::optional<std::size_t> max_concurrency;
};

struct PipelineConfig {
    fs::path tasks;
    fs::path db_root;
    fs::path output_dir = "out";
    fs::path partition_manifest;
    std::uint64_t seed = 0;
    PromptKind kind = PromptKind::QPCoT;
    double timeout_s = 30.0;
    std::optional<EndpointConfig> teacher;
    std::optional<EndpointConfig> student;
    std::map<Split, SplitTargets> targets;
    bool retry_failed = false;
    SchemaStyle schema_style = SchemaStyle::DDL;
};

EndpointConfig endpoint_from_json(const json& j, const std::string& role) {
    if (!j.is_object()) throw Error(role + " endpoint must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key == "api_key" || key == "key" || key == "token")
            throw Error(role + " endpoint: secrets are read from the environment (set api_key_env), not the config file");
    EndpointConfig e;
    e.base_url = j.value("base_url", e.base_url);
    e.model_name = j.value("model", j.value("model_name", e.model_name));
    e.api_key_env = j.value("api_key_env", e.api_key_env);
    e.max_input_tokens = j.value("max_input_tokens", e.max_input_tokens);
    e.max_output_tokens = j.value("max_output_tokens", e.max_output_tokens);
    e.temperature = j.value("temperature", e.temperature);
    e.max_concurrency = j.value("max_concurrency", e.max_concurrency);
    e.request_timeout_s = j.value("request_timeout_s", e.request_timeout_s);
    e.max_attempts = j.value("max_attempts", e.max_attempts);
    e.backoff_initial_ms = j.value("backoff_initial_ms", e.backoff_initial_ms);
    e.backoff_max_ms = j.value("backoff_max_ms", e.backoff_max_ms);
    return e;
}

SplitTargets targets_from_json(Split split, const json& j) {
    SplitTargets t;
    t.split = split;
    for (const auto c : kAllCategories) t.per_category[c] = 0;
    for (const auto& [name, v] : j.items()) {
        const auto c = parse_category(name);
        if (!c) throw Error("unknown category '" + name + "' in targets");
        const auto n = v.get<std::int64_t>();
        if (n < 0) throw Error("negative target for " + name);
        t.per_category[*c] = static_cast<std::size_t>(n);
    }
    return t;
}

PromptKind kind_or_throw(const std::string& s) {
    const auto k = parse_prompt_kind(s);
    if (!k) throw Error("unknown prompt kind '" + s + "' (expected qpcot, cot or direct)");
    return *k;
}

PipelineConfig load_config(const Overrides& o) {
    PipelineConfig c;
    for (const auto split : {Split::Train, Split::IDVal, Split::OODVal}) c.targets[split] = SplitTargets::defaults(split);

    if (!o.config.empty()) {
        const fs::path cfg_path = o.config;
        std::ifstream in(cfg_path);
        if (!in) throw Error("cannot read config '" + o.config + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error("malformed config '" + o.config + "': " + e.what());
        }
        const auto base = cfg_path.parent_path();
        auto path_of = [&](const char* key) -> fs::path {
            if (!j.contains(key)) return {};
            fs::path p = j.at(key).get<std::string>();
            return p.is_relative() ? base / p : p;
        };
        try {
            c.tasks = path_of("tasks");
            c.db_root = path_of("db_root");
            if (j.contains("output_dir")) c.output_dir = path_of("output_dir");
            c.partition_manifest = path_of("partition_manifest");
            c.seed = j.value("seed", c.seed);
            if (j.contains("prompt_kind")) c.kind = kind_or_throw(j.at("prompt_kind").get<std::string>());
            c.timeout_s = j.value("executor_timeout_s", c.timeout_s);
            if (j.contains("teacher")) c.teacher = endpoint_from_json(j.at("teacher"), "teacher");
            if (j.contains("student")) c.student = endpoint_from_json(j.at("student"), "student");
            if (j.contains("targets")) {
                for (const auto& [name, v] : j.at("targets").items()) {
                    const auto split = parse_split(name);
                    if (!split) throw Error("unknown split '" + name + "' in targets");
                    c.targets[*split] = targets_from_json(*split, v);
                }
            }
            if (j.contains("sampler")) {
                const auto& s = j.at("sampler");
                c.retry_failed = s.value("retry_failed", c.retry_failed);
                const auto style = s.value("schema_style", std::string("ddl"));
                if (style == "ddl") c.schema_style = SchemaStyle::DDL;
                else if (style == "commented") c.schema_style = SchemaStyle::Commented;
                else throw Error("unknown schema_style '" + style + "'");
            }
        } catch (const json::exception& e) {
            throw Error("invalid config '" + o.config + "': " + e.what());
        }
    }

    if (!o.tasks.empty()) c.tasks = o.tasks;
    if (!o.db_root.empty()) c.db_root = o.db_root;
    if (!o.partition.empty()) c.partition_manifest = o.partition;
    if (!o.kind.empty()) c.kind = kind_or_throw(o.kind);
    if (o.seed) c.seed = *o.seed;
    if (o.timeout_s) c.timeout_s = *o.timeout_s;
    if (c.partition_manifest.empty()) c.partition_manifest = c.output_dir / "partition.json";
    if (c.timeout_s <= 0) throw Error("executor timeout must be positive");
    return c;
}

void require_exists(const fs::path& p, const char* what) {
    if (p.empty()) throw Error(std::string(what) + " is not configured");
    if (!fs::exists(p)) throw Error(std::string(what) + " '" + p.string() + "' does not exist");
}

Corpus open_corpus(const PipelineConfig& c) {
    require_exists(c.tasks, "task file");
    require_exists(c.db_root, "database root");
    return load_corpus(c.tasks, c.db_root);
}

EndpointConfig role_endpoint(const PipelineConfig& c, const Overrides& o, const std::string& role) {
    std::optional<EndpointConfig> e = role == "teacher" ? c.teacher : c.student;
    if (!o.base_url.empty() || !o.model.empty()) {
        if (!e) e = EndpointConfig{};
        if (!o.base_url.empty()) e->base_url = o.base_url;
        if (!o.model.empty()) e->model_name = o.model;
    }
    if (!e) throw Error("no " + role + " endpoint configured");
    if (o.max_concurrency) e->max_concurrency = *o.max_concurrency;
    e->validate();
    return *e;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string split_file_name(Split s) {
    switch (s) {
    case Split::Train: return "train.jsonl";
    case Split::IDVal: return "idval.jsonl";
    case Split::OODVal: return "oodval.jsonl";
    }
    return "split.jsonl";
}

std::set<std::string> databases_under(const fs::path& root) {
    std::set<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const auto id = entry.path().filename().string();
        if (fs::exists(entry.path() / (id + ".sqlite"))) ids.insert(id);
    }
    return ids;
}

int cmd_partition(const PipelineConfig& c, const Overrides& o, std::ostream& out) {
    require_exists(c.db_root, "database root");
    const auto ids = databases_under(c.db_root);
    const auto partition = partition_databases(ids, c.seed);
    const fs::path path = o.out.empty() ? c.partition_manifest : fs::path(o.out);
    ensure_parent(path);
    write_partition_manifest(partition, path);
    out << "partition: " << partition.id_pool.size() << " in-domain, " << partition.ood_pool.size()
        << " out-of-domain databases -> " << path.string() << '\n';
    return kExitOk;
}

int cmd_classify(const PipelineConfig& c, const Overrides& o, const std::string& sql_text, std::ostream& out) {
    if (!sql_text.empty()) {
        const auto p = profile_sql(sql_text);
        out << to_string(classify_complexity(p)) << '\t' << describe(p) << '\n';
        return kExitOk;
    }
    const auto corpus = open_corpus(c);
    std::string csv =
        "question_id,db_id,category,has_join,has_set_op,has_subquery,has_group_by,has_order_by,has_aggregate,"
        "table_count\n";
    for (const auto& t : corpus.tasks) {
        csv += std::to_string(t.question_id) + ',' + t.db_id + ',';
        try {
            const auto p = profile_sql(t.gold_sql);
            csv += std::string(to_string(classify_complexity(p))) + ',' + std::to_string(p.has_join) + ',' +
                   std::to_string(p.has_set_op) + ',' + std::to_string(p.has_subquery) + ',' +
                   std::to_string(p.has_group_by) + ',' + std::to_string(p.has_order_by) + ',' +
                   std::to_string(p.has_aggregate) + ',' + std::to_string(p.table_count) + '\n';
        } catch (const sql::ParseError& e) {
            log::warn("question " + std::to_string(t.question_id) + ": " + e.what());
            csv += "Unparseable,,,,,,,\n";
        }
    }
    if (o.out.empty()) out << csv;
    else write_text(o.out, csv);
    return kExitOk;
}

int cmd_build_dataset(const PipelineConfig& c, const Overrides& o, std::ostream& out, std::ostream& err) {
    auto corpus = open_corpus(c);
    require_exists(c.partition_manifest, "partition manifest");
    const auto partition = read_partition_manifest(c.partition_manifest);
    reject_unpartitioned(corpus, partition);

    const Executor executor(c.db_root, ExecLimits{c.timeout_s});
    TeacherFn teacher;
    std::string model_name = "gold";
    if (c.kind != PromptKind::FNGoldDirect) {
        const auto endpoint = role_endpoint(c, o, "teacher");
        model_name = endpoint.model_name;
        teacher = endpoint_teacher(endpoint);
    }

    const fs::path dir = o.out.empty() ? c.output_dir / std::string(to_string(c.kind)) : fs::path(o.out);
    fs::create_directories(dir);

    SamplerOptions options;
    options.seed = c.seed;
    options.retry_failed = c.retry_failed;
    options.schema_style = c.schema_style;

    std::set<std::int64_t> used;
    std::vector<SamplingReport> reports;
    for (const auto split : {Split::Train, Split::IDVal, Split::OODVal}) {
        auto result = build_split(corpus, partition, c.targets.at(split), c.kind, teacher, executor, options, used);
        for (const auto& r : result.records) used.insert(r.question_id);
        const auto path = dir / split_file_name(split);
        emit_dataset(result.records, result.report, model_name, path);
        out << to_string(split) << ':';
        for (const auto& [cat, l] : result.report.categories)
            out << ' ' << to_string(cat) << '=' << l.admitted << '/' << l.target;
        out << " -> " << path.string() << '\n';
        reports.push_back(std::move(result.report));
    }

    const auto report_json = shortfall_report_json(reports);
    write_text(dir / "sampling_report.json", report_json + "\n");
    const bool shortfall = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.has_shortfall(); });
    if (shortfall) {
        err << "shortfall: candidate pools exhausted before targets were met\n" << report_json << '\n';
        return kExitShortfall;
    }
    return kExitOk;
}

int cmd_infer(const PipelineConfig& c, const Overrides& o, const std::string& questions, const std::string& pool,
              std::ostream& out) {
    if (o.role != "teacher" && o.role != "student") throw Error("--role must be teacher or student");
    const auto corpus = open_corpus(c);
    const auto endpoint = role_endpoint(c, o, o.role);

    std::vector<const TaskInstance*> selected;
    std::unordered_map<std::int64_t, const TaskInstance*> by_id;
    for (const auto& t : corpus.tasks) by_id.emplace(t.question_id, &t);
    if (!questions.empty()) {
        for (const auto& r : load_dataset(questions)) {
            const auto it = by_id.find(r.question_id);
            if (it == by_id.end()) throw Error("question_id " + std::to_string(r.question_id) + " not in corpus");
            selected.push_back(it->second);
        }
    } else {
        std::optional<CorpusPartition> partition;
        if (pool != "all") {
            require_exists(c.partition_manifest, "partition manifest");
            partition = read_partition_manifest(c.partition_manifest);
        }
        for (const auto& t : corpus.tasks) {
            if (pool == "id" && !partition->id_pool.count(t.db_id)) continue;
            if (pool == "ood" && !partition->ood_pool.count(t.db_id)) continue;
            selected.push_back(&t);
        }
    }

    std::unordered_map<std::string, std::string> schema_cache;
    std::vector<GenerationRequest> requests;
    std::vector<std::optional<std::string>> render_errors;
    for (const auto* t : selected) {
        auto it = schema_cache.find(t->db_id);
        if (it == schema_cache.end())
            it = schema_cache.emplace(t->db_id, serialize_schema(corpus.schema(t->db_id), c.schema_style)).first;
        GenerationRequest req;
        req.question_id = t->question_id;
        try {
            req.prompt = render_prompt(c.kind, it->second, t->question, t->hint);
            render_errors.emplace_back();
        } catch (const Error& e) {
            req.prompt.kind = c.kind;
            req.prompt.token_estimate = SIZE_MAX;  // rejected by the gateway without dispatch
            render_errors.emplace_back(e.what());
        }
        requests.push_back(std::move(req));
    }

    auto batch = generate_batch(endpoint, requests);
    for (std::size_t i = 0; i < render_errors.size(); ++i)
        if (render_errors[i]) batch.records[i].transport_error = "prompt rejected: " + *render_errors[i];

    const fs::path path = o.out.empty() ? c.output_dir / ("generations_" + o.role + ".jsonl") : fs::path(o.out);
    ensure_parent(path);
    write_generation_records(batch.records, path);
    out << "infer: " << batch.records.size() << " records, " << batch.failures.size() << " failed -> "
        << path.string() << '\n';
    return kExitOk;
}

int cmd_evaluate(const PipelineConfig& c, const Overrides& o, const std::string& generations, std::ostream& out) {
    require_exists(generations, "generations file");
    const auto corpus = open_corpus(c);
    std::unordered_map<std::int64_t, const TaskInstance*> by_id;
    for (const auto& t : corpus.tasks) by_id.emplace(t.question_id, &t);

    const Executor executor(c.db_root, ExecLimits{c.timeout_s});
    std::vector<EvalRecord> verdicts;
    for (const auto& g : load_generation_records(generations)) {
        const auto it = by_id.find(g.question_id);
        if (it == by_id.end()) throw Error("question_id " + std::to_string(g.question_id) + " not in corpus");
        verdicts.push_back(evaluate_generation(*it->second, g, executor));
    }
    const fs::path path = o.out.empty() ? c.output_dir / "verdicts.jsonl" : fs::path(o.out);
    ensure_parent(path);
    write_eval_records(verdicts, path);
    const auto s = summarize(verdicts);
    out << "evaluate: " << s.n << " items, EX " << s.successes << '/' << s.n << " -> " << path.string() << '\n';
    return kExitOk;
}

int cmd_report(const PipelineConfig& c, const Overrides& o, const std::string& eval, const std::string& baseline,
               const std::string& treatment, const std::string& teacher, std::ostream& out) {
    const fs::path dir = o.out.empty() ? c.output_dir / "report" : fs::path(o.out);
    fs::create_directories(dir);

    if (!eval.empty()) {
        if (!baseline.empty() || !treatment.empty()) throw Error("--eval cannot be combined with --baseline/--treatment");
        const auto records = load_eval_records(eval);
        write_text(dir / "summary.json", summary_json(summarize(records)) + "\n");
        write_text(dir / "summary.csv", summary_csv(summarize(records)));
        const auto constructs = ex_by_construct(records);
        write_text(dir / "constructs.csv", constructs_csv(constructs));
        for (const auto& note : constructs.notes) out << "note: " << note << '\n';
        out << "report -> " << dir.string() << '\n';
        return kExitOk;
    }
    if (baseline.empty() || treatment.empty()) throw Error("report needs --eval, or both --baseline and --treatment");

    const auto base = load_eval_records(baseline);
    const auto treat = load_eval_records(treatment);
    const auto summary = summarize(treat);
    write_text(dir / "summary.json", summary_json(summary) + "\n");
    write_text(dir / "summary.csv", summary_csv(summary));
    write_text(dir / "baseline_summary.json", summary_json(summarize(base)) + "\n");
    const auto constructs = ex_by_construct(treat);
    write_text(dir / "constructs.csv", constructs_csv(constructs));
    write_text(dir / "transitions.json", transitions_json(transitions(base, treat)) + "\n");
    const auto reference = teacher.empty() ? base : load_eval_records(teacher);
    write_text(dir / "gains_losses.json", gains_losses_json(gains_losses(treat, reference)) + "\n");
    for (const auto& note : constructs.notes) out << "note: " << note << '\n';
    out << "report -> " << dir.string() << '\n';
    return kExitOk;
}

int cmd_verify(const PipelineConfig& c, const std::vector<std::string>& datasets, std::ostream& out) {
    const auto corpus = open_corpus(c);
    const Executor executor(c.db_root, ExecLimits{c.timeout_s});
    std::optional<CorpusPartition> partition;
    if (fs::exists(c.partition_manifest)) partition = read_partition_manifest(c.partition_manifest);

    std::vector<DistillRecord> records;
    for (const auto& d : datasets) {
        auto part = load_dataset(d);
        records.insert(records.end(), part.begin(), part.end());
    }
    const auto report = verify_dataset(records, corpus, executor, partition ? &*partition : nullptr);
    out << "verify-dataset: " << report.matched << '/' << report.checked << " records match"
        << (partition ? "" : " (no partition manifest; pool check skipped)") << '\n';
    for (const auto& f : report.failures) out << "  question " << f.question_id << ": " << f.reason << '\n';
    return report.ok() ? kExitOk : kExitShortfall;
}

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "Pipeline configuration (JSON)");
    sub->add_option("--tasks", o.tasks, "BIRD-style task file");
    sub->add_option("--db-root", o.db_root, "Directory holding <db_id>/<db_id>.sqlite");
    sub->add_option("--seed", o.seed, "Seed for partitioning and sampling");
    sub->add_option("--timeout-s", o.timeout_s, "Per-query execution timeout in seconds");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Struct-SQL distillation pipeline", "structsql"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "debug, info, warn, error or off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    Overrides o;
    std::string sql_text, questions, pool = "all", generations, eval, baseline, treatment, teacher;
    std::vector<std::string> datasets;

    auto* partition = app.add_subcommand("partition", "Split databases into in-domain and out-of-domain pools");
    add_common(partition, o);
    partition->add_option("--out", o.out, "Manifest path (default <output_dir>/partition.json)");

    auto* classify = app.add_subcommand("classify", "Classify SQL by structural complexity");
    add_common(classify, o);
    classify->add_option("--sql", sql_text, "Classify one query instead of the corpus");
    classify->add_option("--out", o.out, "CSV output path (default stdout)");

    auto* build = app.add_subcommand("build-dataset", "Build Train, IDVal and OODVal distillation datasets");
    add_common(build, o);
    build->add_option("--kind", o.kind, "qpcot, cot or direct")->check(CLI::IsMember({"qpcot", "cot", "direct"}));
    build->add_option("--partition", o.partition, "Partition manifest");
    build->add_option("--max-concurrency", o.max_concurrency, "Concurrent teacher requests");
    build->add_option("--base-url", o.base_url, "Teacher endpoint base URL");
    build->add_option("--model", o.model, "Teacher model name");
    build->add_option("--out", o.out, "Output directory (default <output_dir>/<kind>)");

    auto* infer = app.add_subcommand("infer", "Query a model for every task of an evaluation set");
    add_common(infer, o);
    infer->add_option("--role", o.role, "teacher or student")->check(CLI::IsMember({"teacher", "student"}));
    infer->add_option("--kind", o.kind, "qpcot, cot or direct")->check(CLI::IsMember({"qpcot", "cot", "direct"}));
    infer->add_option("--partition", o.partition, "Partition manifest (for --pool id|ood)");
    infer->add_option("--questions", questions, "Dataset JSONL whose question_ids form the evaluation set");
    infer->add_option("--pool", pool, "all, id or ood")->check(CLI::IsMember({"all", "id", "ood"}));
    infer->add_option("--max-concurrency", o.max_concurrency, "Concurrent requests");
    infer->add_option("--base-url", o.base_url, "Endpoint base URL");
    infer->add_option("--model", o.model, "Model name");
    infer->add_option("--out", o.out, "Output JSONL (default <output_dir>/generations_<role>.jsonl)");

    auto* evaluate = app.add_subcommand("evaluate", "Execute generations and assign verdicts");
    add_common(evaluate, o);
    evaluate->add_option("--generations", generations, "Generation JSONL from infer")->required();
    evaluate->add_option("--out", o.out, "Verdict JSONL (default <output_dir>/verdicts.jsonl)");

    auto* report = app.add_subcommand("report", "Summaries, construct breakdown, gains/losses and transitions");
    report->add_option("--config", o.config, "Pipeline configuration (JSON)");
    report->add_option("--eval", eval, "Verdict JSONL for a single-run summary");
    report->add_option("--baseline", baseline, "Baseline verdict JSONL");
    report->add_option("--treatment", treatment, "Treatment verdict JSONL");
    report->add_option("--teacher", teacher, "Teacher verdict JSONL for gains/losses (default: baseline)");
    report->add_option("--out", o.out, "Output directory (default <output_dir>/report)");

    auto* verify = app.add_subcommand("verify-dataset", "Re-execute every record of emitted datasets");
    add_common(verify, o);
    verify->add_option("--partition", o.partition, "Partition manifest for the pool check");
    verify->add_option("--dataset", datasets, "Dataset JSONL file(s)")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    static const std::map<std::string, log::Level> levels = {{"debug", log::Level::Debug},
                                                             {"info", log::Level::Info},
                                                             {"warn", log::Level::Warn},
                                                             {"error", log::Level::Error},
                                                             {"off", log::Level::Off}};
    log::set_level(levels.at(log_level));

    try {
        const auto c = load_config(o);
        if (*partition) return cmd_partition(c, o, out);
        if (*classify) return cmd_classify(c, o, sql_text, out);
        if (*build) return cmd_build_dataset(c, o, out, err);
        if (*infer) return cmd_infer(c, o, questions, pool, out);
        if (*evaluate) return cmd_evaluate(c, o, generations, out);
        if (*report) return cmd_report(c, o, eval, baseline, treatment, teacher, out);
        if (*verify) return cmd_verify(c, datasets, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFatal;
    }
    return kExitFatal;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace structsql::cli
