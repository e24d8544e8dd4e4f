#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "structsql/corpus.hpp"
#include "structsql/executor.hpp"
#include "structsql/gateway.hpp"
#include "structsql/sqlstruct.hpp"
#include "structsql/taxonomy.hpp"

namespace structsql {

/// One evaluated prediction, as stored in verdict JSONL files.
struct EvalRecord {
    std::int64_t question_id = 0;
    std::string db_id;
    Difficulty difficulty = Difficulty::Simple;
    Verdict verdict;
    std::int64_t completion_tokens = 0;
    bool tokens_estimated = false;
    std::optional<ConstructProfile> gold_profile;
};

std::string eval_record_to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(std::string_view line);
void write_eval_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> load_eval_records(const std::filesystem::path& path);

std::string generation_record_to_json(const GenerationRecord& r);
GenerationRecord generation_record_from_json(std::string_view line);
void write_generation_records(const std::vector<GenerationRecord>& records, const std::filesystem::path& path);
std::vector<GenerationRecord> load_generation_records(const std::filesystem::path& path);

// Re-extracts SQL from record.response, executes it, compares with the gold
// result and classifies. Records with a transport error count as Gen. An
// unavailable gold result throws Error.
EvalRecord evaluate_generation(const TaskInstance& task, const GenerationRecord& record, const Executor& executor);

struct DifficultyStats {
    std::size_t n = 0;
    std::size_t successes = 0;
    double ex = 0.0;
};

struct EvalSummary {
    std::size_t n = 0;
    std::size_t successes = 0;
    double ex_overall = 0.0;
    std::map<Difficulty, DifficultyStats> ex_by_difficulty;  // every difficulty present, n may be 0
    double avg_tokens = 0.0;
    double tokens_stddev = 0.0;                // population standard deviation
    std::size_t tokens_estimated = 0;          // items whose token count is a fallback estimate
    std::map<std::string, std::size_t> histogram;  // verdict_key -> count
    std::map<VerdictClass, std::size_t> class_histogram;
};

// Throws Error on a duplicate question_id.
EvalSummary summarize(const std::vector<EvalRecord>& records);

struct ConstructRow {
    std::string construct;  // join, set_op, subquery, group_by, order_by, aggregate
    std::size_t n = 0;
    std::size_t successes = 0;
    double ex = 0.0;
};

struct ConstructBreakdown {
    std::vector<ConstructRow> rows;  // non-empty subsets only, fixed construct order
    std::vector<std::string> notes;  // one per omitted construct
};

ConstructBreakdown ex_by_construct(const std::vector<EvalRecord>& records,
                                   const std::map<std::int64_t, ConstructProfile>& profiles);
// Uses each record's gold_profile; records without one throw Error.
ConstructBreakdown ex_by_construct(const std::vector<EvalRecord>& records);

struct GainLoss {
    std::size_t gains = 0;    // student correct, teacher wrong
    std::size_t losses = 0;   // teacher correct, student wrong
    std::size_t both = 0;
    std::size_t neither = 0;
    std::size_t n() const { return gains + losses + both + neither; }
};

// Both runs must cover the same question_ids; otherwise Error listing the
// symmetric difference.
GainLoss gains_losses(const std::vector<EvalRecord>& student, const std::vector<EvalRecord>& teacher);

// Row and column order of the transition matrix.
inline constexpr VerdictClass kTransitionStates[] = {VerdictClass::Success, VerdictClass::Sem, VerdictClass::Syn,
                                                     VerdictClass::Gen};
std::size_t transition_index(VerdictClass c);

struct TransitionMatrix {
    std::array<std::array<std::size_t, 4>, 4> counts{};  // [baseline][treatment]
    std::size_t n = 0;

    std::size_t row_sum(std::size_t i) const;
    std::size_t col_sum(std::size_t j) const;
    // Fraction of baseline state i items that ended in treatment state j; 0 for empty rows.
    double rate(std::size_t i, std::size_t j) const;
};

TransitionMatrix transitions(const std::vector<EvalRecord>& baseline, const std::vector<EvalRecord>& treatment);

std::string summary_json(const EvalSummary& s);
std::string summary_csv(const EvalSummary& s);
std::string constructs_csv(const ConstructBreakdown& b);
std::string gains_losses_json(const GainLoss& g);
std::string transitions_json(const TransitionMatrix& t);

}  // namespace structsql
