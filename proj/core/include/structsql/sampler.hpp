#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "structsql/corpus.hpp"
#include "structsql/executor.hpp"
#include "structsql/gateway.hpp"
#include "structsql/types.hpp"

namespace structsql {

struct SplitTargets {
    Split split = Split::Train;
    std::map<ComplexityCategory, std::size_t> per_category;

    std::size_t total() const;
    std::size_t target(ComplexityCategory c) const;

    // 1000 / 150 / 150 samples, distributed over the four categories.
    static SplitTargets defaults(Split split);
};

/// One admitted training example. target_sequence is the teacher response
/// verbatim (reasoning followed by SQL), or the gold SQL for FNGoldDirect.
struct DistillRecord {
    std::int64_t question_id = 0;
    std::string db_id;
    PromptKind prompt_kind = PromptKind::QPCoT;
    std::string prompt;
    std::string target_sequence;
    ComplexityCategory category = ComplexityCategory::SingleTable;
    Split split = Split::Train;
    std::int64_t teacher_tokens = 0;

    bool operator==(const DistillRecord&) const = default;
};

struct CategoryLedger {
    std::size_t target = 0;
    std::size_t pool_size = 0;          // eligible candidates after pool, overlap and parse filters
    std::size_t attempted = 0;          // distinct candidates visited
    std::size_t admitted = 0;
    std::size_t rejected = 0;           // teacher answered, answer failed validation
    std::size_t transport_skipped = 0;  // no usable answer from the endpoint
    std::size_t retry_queries = 0;

    std::size_t shortfall() const { return admitted >= target ? 0 : target - admitted; }
};

struct SamplingReport {
    Split split = Split::Train;
    PromptKind kind = PromptKind::QPCoT;
    std::uint64_t seed = 0;
    std::map<ComplexityCategory, CategoryLedger> categories;
    std::size_t unparseable_gold = 0;

    bool has_shortfall() const;
};

struct SamplerOptions {
    std::uint64_t seed = 0;
    SchemaStyle schema_style = SchemaStyle::DDL;
    // Second chance for candidates the single pass rejected, used only when
    // the pass leaves a shortfall.
    bool retry_failed = false;
    double retry_temperature = 0.7;
    int retry_attempts = 2;
};

// Anything that turns a batch of requests into records, order preserved.
// The default wraps generate_batch; tests substitute scripted teachers.
using TeacherFn = std::function<BatchResult(const std::vector<GenerationRequest>&)>;
TeacherFn endpoint_teacher(const EndpointConfig& config);

struct SplitResult {
    std::vector<DistillRecord> records;
    SamplingReport report;
};

/// Stratified, success-based sampling for one split. Candidates are the
/// tasks whose db_id lies in the split's pool (ood_pool for OODVal, id_pool
/// otherwise) and whose question_id is not in `exclude_question_ids`. Each
/// category is walked in seeded-shuffle order; a candidate is admitted when
/// its extracted SQL executes and compares Match against the gold result.
/// The result is identical to a sequential walk for a deterministic teacher.
/// FNGoldDirect builds records from gold SQL and never calls the teacher.
SplitResult build_split(const Corpus& corpus, const CorpusPartition& partition, const SplitTargets& targets,
                        PromptKind kind, const TeacherFn& teacher, const Executor& executor,
                        const SamplerOptions& options, const std::set<std::int64_t>& exclude_question_ids = {});

// Seed for one category's walk; distinct per split and category.
std::uint64_t category_seed(std::uint64_t seed, Split split, ComplexityCategory category);

struct DatasetManifest {
    Split split = Split::Train;
    PromptKind kind = PromptKind::QPCoT;
    std::uint64_t seed = 0;
    std::string model_name;
    std::map<ComplexityCategory, CategoryLedger> categories;
    std::size_t record_count = 0;
    std::string anti_overlap_policy;
};

std::string record_to_json(const DistillRecord& record);
DistillRecord record_from_json(std::string_view line);

/// Writes one JSON record per line and a sidecar `<path>.manifest.json`.
/// Unwritable paths are fatal.
void emit_dataset(const std::vector<DistillRecord>& records, const SamplingReport& report,
                  const std::string& model_name, const std::filesystem::path& path);
std::vector<DistillRecord> load_dataset(const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

std::string shortfall_report_json(const std::vector<SamplingReport>& reports);

struct VerificationFailure {
    std::int64_t question_id = 0;
    std::string reason;
};

struct VerificationReport {
    std::size_t checked = 0;
    std::size_t matched = 0;
    std::vector<VerificationFailure> failures;
    bool ok() const { return failures.empty() && matched == checked; }
};

/// Re-extracts and re-executes every record's SQL against its gold query.
/// With a partition, also checks that each record's db_id lies in the pool
/// its split requires.
VerificationReport verify_dataset(const std::vector<DistillRecord>& records, const Corpus& corpus,
                                  const Executor& executor, const CorpusPartition* partition = nullptr);

}  // namespace structsql
