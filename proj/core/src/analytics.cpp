#include "structsql/analytics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace structsql {

using ojson = nlohmann::ordered_json;

namespace {

std::string dump(const ojson& j, int indent = -1) {
    return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string fmt_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

ojson profile_json(const ConstructProfile& p) {
    ojson j;
    j["has_join"] = p.has_join;
    j["has_set_op"] = p.has_set_op;
    j["has_subquery"] = p.has_subquery;
    j["has_group_by"] = p.has_group_by;
    j["has_order_by"] = p.has_order_by;
    j["has_aggregate"] = p.has_aggregate;
    j["table_count"] = p.table_count;
    return j;
}

ConstructProfile profile_from_json(const ojson& j) {
    ConstructProfile p;
    p.has_join = j.at("has_join").get<bool>();
    p.has_set_op = j.at("has_set_op").get<bool>();
    p.has_subquery = j.at("has_subquery").get<bool>();
    p.has_group_by = j.at("has_group_by").get<bool>();
    p.has_order_by = j.at("has_order_by").get<bool>();
    p.has_aggregate = j.at("has_aggregate").get<bool>();
    p.table_count = j.at("table_count").get<std::size_t>();
    return p;
}

template <typename T, typename Parse>
std::vector<T> load_jsonl(const std::filesystem::path& path, Parse parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse(line));
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename T, typename Format>
void write_jsonl(const std::vector<T>& items, const std::filesystem::path& path, Format format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& item : items) out << format(item) << '\n';
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

// Success flag per question_id; duplicates are fatal.
std::map<std::int64_t, VerdictClass> index_by_id(const std::vector<EvalRecord>& records, const char* label) {
    std::map<std::int64_t, VerdictClass> m;
    for (const auto& r : records)
        if (!m.emplace(r.question_id, r.verdict.cls).second)
            throw Error(std::string(label) + " run has duplicate question_id " + std::to_string(r.question_id));
    return m;
}

void require_same_ids(const std::map<std::int64_t, VerdictClass>& a, const std::map<std::int64_t, VerdictClass>& b,
                      const char* a_label, const char* b_label) {
    std::vector<std::int64_t> only_a, only_b;
    for (const auto& [id, _] : a)
        if (!b.count(id)) only_a.push_back(id);
    for (const auto& [id, _] : b)
        if (!a.count(id)) only_b.push_back(id);
    if (only_a.empty() && only_b.empty()) return;
    auto list = [](const std::vector<std::int64_t>& ids) {
        std::string s;
        for (const auto id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
        return s.empty() ? std::string("none") : s;
    };
    throw Error(std::string("runs cover different question_ids; only in ") + a_label + ": " + list(only_a) +
                "; only in " + b_label + ": " + list(only_b));
}

}  // namespace

std::string eval_record_to_json(const EvalRecord& r) {
    ojson j;
    j["question_id"] = r.question_id;
    j["db_id"] = r.db_id;
    j["difficulty"] = to_string(r.difficulty);
    j["cls"] = to_string(r.verdict.cls);
    j["sub"] = r.verdict.sub ? ojson(std::string(to_string(*r.verdict.sub))) : ojson(nullptr);
    j["detail"] = r.verdict.detail;
    j["completion_tokens"] = r.completion_tokens;
    j["tokens_estimated"] = r.tokens_estimated;
    j["gold_profile"] = r.gold_profile ? profile_json(*r.gold_profile) : ojson(nullptr);
    return dump(j);
}

EvalRecord eval_record_from_json(std::string_view line) {
    try {
        const auto j = ojson::parse(line);
        EvalRecord r;
        r.question_id = j.at("question_id").get<std::int64_t>();
        r.db_id = j.value("db_id", std::string());
        const auto diff = j.at("difficulty").get<std::string>();
        const auto d = parse_difficulty(diff);
        if (!d) throw Error("unknown difficulty '" + diff + "'");
        r.difficulty = *d;
        const auto cls_text = j.at("cls").get<std::string>();
        const auto cls = parse_verdict_class(cls_text);
        if (!cls) throw Error("unknown verdict class '" + cls_text + "'");
        r.verdict.cls = *cls;
        if (const auto it = j.find("sub"); it != j.end() && !it->is_null()) {
            const auto sub_text = it->get<std::string>();
            const auto sub = parse_subcategory(*cls, sub_text);
            if (!sub) throw Error("subcategory '" + sub_text + "' does not belong to " + cls_text);
            r.verdict.sub = *sub;
        }
        if ((r.verdict.cls == VerdictClass::Syn || r.verdict.cls == VerdictClass::Sem) && !r.verdict.sub)
            throw Error(cls_text + " verdict without subcategory");
        r.verdict.detail = j.value("detail", std::string());
        r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
        r.tokens_estimated = j.value("tokens_estimated", false);
        if (const auto it = j.find("gold_profile"); it != j.end() && !it->is_null())
            r.gold_profile = profile_from_json(*it);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed verdict record: ") + e.what());
    }
}

void write_eval_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
    write_jsonl(records, path, eval_record_to_json);
}

std::vector<EvalRecord> load_eval_records(const std::filesystem::path& path) {
    return load_jsonl<EvalRecord>(path, eval_record_from_json);
}

std::string generation_record_to_json(const GenerationRecord& r) {
    ojson j;
    j["question_id"] = r.question_id;
    j["prompt_kind"] = to_string(r.prompt_kind);
    j["prompt"] = r.prompt;
    j["response"] = r.response;
    j["reasoning"] = r.extracted.reasoning;
    j["sql"] = r.extracted.sql ? ojson(*r.extracted.sql) : ojson(nullptr);
    j["extraction_note"] = to_string(r.extracted.note);
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    j["usage_estimated"] = r.usage_estimated;
    j["latency_ms"] = r.latency_ms;
    j["attempt"] = r.attempt;
    j["transport_error"] = r.transport_error ? ojson(*r.transport_error) : ojson(nullptr);
    return dump(j);
}

GenerationRecord generation_record_from_json(std::string_view line) {
    try {
        const auto j = ojson::parse(line);
        GenerationRecord r;
        r.question_id = j.at("question_id").get<std::int64_t>();
        const auto kind_text = j.at("prompt_kind").get<std::string>();
        const auto kind = parse_prompt_kind(kind_text);
        if (!kind) throw Error("unknown prompt_kind '" + kind_text + "'");
        r.prompt_kind = *kind;
        r.prompt = j.value("prompt", std::string());
        r.response = j.value("response", std::string());
        r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
        r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
        r.usage_estimated = j.value("usage_estimated", false);
        r.latency_ms = j.value("latency_ms", std::int64_t{0});
        r.attempt = j.value("attempt", 0);
        if (const auto it = j.find("transport_error"); it != j.end() && !it->is_null())
            r.transport_error = it->get<std::string>();
        if (r.transport_error) r.extracted.note = ExtractionNote::NoSqlFound;
        else r.extracted = extract_output(r.prompt_kind, r.response);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed generation record: ") + e.what());
    }
}

void write_generation_records(const std::vector<GenerationRecord>& records, const std::filesystem::path& path) {
    write_jsonl(records, path, generation_record_to_json);
}

std::vector<GenerationRecord> load_generation_records(const std::filesystem::path& path) {
    return load_jsonl<GenerationRecord>(path, generation_record_from_json);
}

EvalRecord evaluate_generation(const TaskInstance& task, const GenerationRecord& record, const Executor& executor) {
    EvalRecord out;
    out.question_id = task.question_id;
    out.db_id = task.db_id;
    out.difficulty = task.difficulty;
    out.completion_tokens = record.completion_tokens;
    out.tokens_estimated = record.usage_estimated;
    try {
        out.gold_profile = profile_sql(task.gold_sql);
    } catch (const sql::ParseError&) {
    }

    ExtractedOutput extracted;
    if (!record.transport_error) extracted = extract_output(record.prompt_kind, record.response);
    if (!extracted.sql) {
        extracted.note = ExtractionNote::NoSqlFound;
        out.verdict = classify(extracted, nullptr, nullptr);
        if (record.transport_error) out.verdict.detail = "transport error: " + *record.transport_error;
        return out;
    }
    const auto pred = executor.execute_sql(task.db_id, *extracted.sql);
    if (!pred.ok()) {
        out.verdict = classify(extracted, &pred, nullptr);
        return out;
    }
    const auto gold = executor.execute_sql(task.db_id, task.gold_sql);
    if (!gold.ok())
        throw Error("gold query for question " + std::to_string(task.question_id) + " failed: " +
                    (gold.diagnostic.empty() ? gold.note : gold.diagnostic));
    const auto cmp = compare_results(pred, gold);
    out.verdict = classify(extracted, &pred, &cmp);
    return out;
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
    EvalSummary s;
    for (const auto d : kAllDifficulties) s.ex_by_difficulty[d] = {};
    std::set<std::int64_t> seen;
    double sum = 0.0;
    for (const auto& r : records) {
        if (!seen.insert(r.question_id).second)
            throw Error("duplicate question_id " + std::to_string(r.question_id) + " in verdicts");
        ++s.n;
        const bool ok = r.verdict.cls == VerdictClass::Success;
        s.successes += ok;
        auto& d = s.ex_by_difficulty[r.difficulty];
        ++d.n;
        d.successes += ok;
        sum += static_cast<double>(r.completion_tokens);
        s.tokens_estimated += r.tokens_estimated;
        ++s.histogram[verdict_key(r.verdict)];
        ++s.class_histogram[r.verdict.cls];
    }
    s.ex_overall = ratio(s.successes, s.n);
    for (auto& [_, d] : s.ex_by_difficulty) d.ex = ratio(d.successes, d.n);
    if (s.n > 0) {
        s.avg_tokens = sum / static_cast<double>(s.n);
        double sq = 0.0;
        for (const auto& r : records) {
            const double dev = static_cast<double>(r.completion_tokens) - s.avg_tokens;
            sq += dev * dev;
        }
        s.tokens_stddev = std::sqrt(sq / static_cast<double>(s.n));
    }
    return s;
}

ConstructBreakdown ex_by_construct(const std::vector<EvalRecord>& records,
                                   const std::map<std::int64_t, ConstructProfile>& profiles) {
    struct Flag {
        const char* name;
        bool ConstructProfile::*member;
    };
    static constexpr Flag flags[] = {
        {"join", &ConstructProfile::has_join},         {"set_op", &ConstructProfile::has_set_op},
        {"subquery", &ConstructProfile::has_subquery}, {"group_by", &ConstructProfile::has_group_by},
        {"order_by", &ConstructProfile::has_order_by}, {"aggregate", &ConstructProfile::has_aggregate},
    };

    ConstructBreakdown out;
    for (const auto& flag : flags) {
        ConstructRow row;
        row.construct = flag.name;
        for (const auto& r : records) {
            const auto it = profiles.find(r.question_id);
            if (it == profiles.end())
                throw Error("no gold profile for question_id " + std::to_string(r.question_id));
            if (!(it->second.*flag.member)) continue;
            ++row.n;
            row.successes += r.verdict.cls == VerdictClass::Success;
        }
        if (row.n == 0) {
            out.notes.push_back(std::string(flag.name) + ": no items with this construct; omitted");
            continue;
        }
        row.ex = ratio(row.successes, row.n);
        out.rows.push_back(std::move(row));
    }
    return out;
}

ConstructBreakdown ex_by_construct(const std::vector<EvalRecord>& records) {
    std::map<std::int64_t, ConstructProfile> profiles;
    for (const auto& r : records) {
        if (!r.gold_profile) throw Error("verdict for question_id " + std::to_string(r.question_id) + " has no gold_profile");
        profiles[r.question_id] = *r.gold_profile;
    }
    return ex_by_construct(records, profiles);
}

GainLoss gains_losses(const std::vector<EvalRecord>& student, const std::vector<EvalRecord>& teacher) {
    const auto s = index_by_id(student, "student");
    const auto t = index_by_id(teacher, "teacher");
    require_same_ids(s, t, "student", "teacher");
    GainLoss g;
    for (const auto& [id, s_cls] : s) {
        const bool s_ok = s_cls == VerdictClass::Success;
        const bool t_ok = t.at(id) == VerdictClass::Success;
        if (s_ok && t_ok) ++g.both;
        else if (s_ok) ++g.gains;
        else if (t_ok) ++g.losses;
        else ++g.neither;
    }
    return g;
}

std::size_t transition_index(VerdictClass c) {
    switch (c) {
    case VerdictClass::Success: return 0;
    case VerdictClass::Sem: return 1;
    case VerdictClass::Syn: return 2;
    case VerdictClass::Gen: return 3;
    }
    return 0;
}

std::size_t TransitionMatrix::row_sum(std::size_t i) const {
    std::size_t n_row = 0;
    for (const auto c : counts[i]) n_row += c;
    return n_row;
}

std::size_t TransitionMatrix::col_sum(std::size_t j) const {
    std::size_t n_col = 0;
    for (const auto& row : counts) n_col += row[j];
    return n_col;
}

double TransitionMatrix::rate(std::size_t i, std::size_t j) const { return ratio(counts[i][j], row_sum(i)); }

TransitionMatrix transitions(const std::vector<EvalRecord>& baseline, const std::vector<EvalRecord>& treatment) {
    const auto b = index_by_id(baseline, "baseline");
    const auto t = index_by_id(treatment, "treatment");
    require_same_ids(b, t, "baseline", "treatment");
    TransitionMatrix m;
    for (const auto& [id, b_cls] : b) {
        ++m.counts[transition_index(b_cls)][transition_index(t.at(id))];
        ++m.n;
    }
    return m;
}

std::string summary_json(const EvalSummary& s) {
    ojson j;
    j["n"] = s.n;
    j["successes"] = s.successes;
    j["ex_overall"] = s.ex_overall;
    ojson by_diff = ojson::object();
    for (const auto& [d, stats] : s.ex_by_difficulty)
        by_diff[std::string(to_string(d))] = {{"n", stats.n}, {"successes", stats.successes}, {"ex", stats.ex}};
    j["ex_by_difficulty"] = by_diff;
    j["avg_tokens"] = {{"mean", s.avg_tokens}, {"stddev", s.tokens_stddev}, {"estimated_items", s.tokens_estimated}};
    ojson classes = ojson::object();
    for (const auto c : kTransitionStates) {
        const auto it = s.class_histogram.find(c);
        classes[std::string(to_string(c))] = it == s.class_histogram.end() ? 0 : it->second;
    }
    j["class_histogram"] = classes;
    ojson hist = ojson::object();
    for (const auto& [k, v] : s.histogram) hist[k] = v;
    j["verdict_histogram"] = hist;
    j["taxonomy_rules"] = kTaxonomyRulesVersion;
    return dump(j, 2);
}

std::string summary_csv(const EvalSummary& s) {
    std::ostringstream out;
    out << "metric,value\n";
    out << "n," << s.n << '\n';
    out << "successes," << s.successes << '\n';
    out << "ex_overall," << fmt_fraction(s.ex_overall) << '\n';
    for (const auto& [d, stats] : s.ex_by_difficulty) {
        out << "n_" << to_string(d) << ',' << stats.n << '\n';
        out << "ex_" << to_string(d) << ',' << fmt_fraction(stats.ex) << '\n';
    }
    out << "avg_tokens," << fmt_fraction(s.avg_tokens) << '\n';
    out << "tokens_stddev," << fmt_fraction(s.tokens_stddev) << '\n';
    out << "tokens_estimated," << s.tokens_estimated << '\n';
    for (const auto& [k, v] : s.histogram) out << "verdict:" << k << ',' << v << '\n';
    return out.str();
}

std::string constructs_csv(const ConstructBreakdown& b) {
    std::ostringstream out;
    out << "construct,n,successes,ex\n";
    for (const auto& r : b.rows) out << r.construct << ',' << r.n << ',' << r.successes << ',' << fmt_fraction(r.ex) << '\n';
    return out.str();
}

std::string gains_losses_json(const GainLoss& g) {
    ojson j;
    j["n"] = g.n();
    j["gains"] = g.gains;
    j["losses"] = g.losses;
    j["both"] = g.both;
    j["neither"] = g.neither;
    j["student_successes"] = g.both + g.gains;
    j["teacher_successes"] = g.both + g.losses;
    return dump(j, 2);
}

std::string transitions_json(const TransitionMatrix& t) {
    ojson j;
    ojson states = ojson::array();
    for (const auto c : kTransitionStates) states.push_back(to_string(c));
    j["states"] = states;
    j["n"] = t.n;
    ojson counts = ojson::array();
    ojson rates = ojson::object();
    for (std::size_t i = 0; i < 4; ++i) {
        counts.push_back(t.counts[i]);
        ojson row = ojson::object();
        for (std::size_t j2 = 0; j2 < 4; ++j2) row[std::string(to_string(kTransitionStates[j2]))] = t.rate(i, j2);
        rates[std::string(to_string(kTransitionStates[i]))] = row;
    }
    j["counts"] = counts;
    j["rates"] = rates;
    ojson base = ojson::object();
    ojson treat = ojson::object();
    for (std::size_t i = 0; i < 4; ++i) {
        base[std::string(to_string(kTransitionStates[i]))] = t.row_sum(i);
        treat[std::string(to_string(kTransitionStates[i]))] = t.col_sum(i);
    }
    j["baseline_totals"] = base;
    j["treatment_totals"] = treat;
    return dump(j, 2);
}

}  // namespace structsql
