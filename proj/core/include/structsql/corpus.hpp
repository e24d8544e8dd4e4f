#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "structsql/types.hpp"

namespace structsql {

struct TaskInstance {
    std::int64_t question_id = 0;
    std::string db_id;
    std::string question;
    std::string hint;  // BIRD "evidence"
    std::string gold_sql;
    Difficulty difficulty = Difficulty::Simple;
    bool difficulty_missing = false;  // source omitted the field; recorded as Simple
};

struct ColumnInfo {
    std::string name;
    std::string type;
    bool not_null = false;
    int pk_position = 0;  // 1-based position in the primary key, 0 if not part of it
    std::string description;
    std::vector<std::string> value_examples;
};

struct ForeignKey {
    std::string from_column;
    std::string to_table;
    std::string to_column;
};

struct TableInfo {
    std::string name;
    std::vector<ColumnInfo> columns;
    std::vector<ForeignKey> foreign_keys;
};

struct SchemaDescriptor {
    std::string db_id;
    std::vector<TableInfo> tables;
    std::string ddl_text;
    std::string commentary_text;
};

enum class SchemaStyle { DDL, Commented };

struct SchemaLoadOptions {
    std::size_t max_value_examples = 3;
    bool read_descriptions = true;  // db_root/<db_id>/database_description/<table>.csv
};

/// Reads table and column metadata from a SQLite file and renders both
/// schema styles.
SchemaDescriptor load_schema(const std::string& db_id, const std::filesystem::path& db_file,
                             const SchemaLoadOptions& options = {});

// Pure function of the descriptor's tables. An empty schema renders as ""
// and logs a warning.
std::string serialize_schema(const SchemaDescriptor& db, SchemaStyle style);

struct SkippedItem {
    std::size_t index = 0;
    std::string reason;
};

struct LoadReport {
    std::size_t items_in_file = 0;
    std::vector<SkippedItem> skipped;
    std::map<std::string, std::size_t> per_db;
    std::map<Difficulty, std::size_t> per_difficulty;
    std::size_t difficulty_missing = 0;
};

struct Corpus {
    std::vector<TaskInstance> tasks;
    std::map<std::string, SchemaDescriptor> schemas;
    LoadReport report;

    const SchemaDescriptor& schema(const std::string& db_id) const;
    std::set<std::string> db_ids() const;
};

/// Loads a BIRD-style task array. Databases live at
/// db_root/<db_id>/<db_id>.sqlite; a missing one is fatal (Error naming the
/// db_id). Malformed items, and items whose gold SQL SQLite cannot prepare,
/// are skipped and recorded in the report. Items without question_id get
/// their array index.
Corpus load_corpus(const std::filesystem::path& task_file, const std::filesystem::path& db_root,
                   const SchemaLoadOptions& options = {});

struct CorpusPartition {
    std::set<std::string> id_pool;
    std::set<std::string> ood_pool;
    std::uint64_t seed = 0;

    bool contains(const std::string& db_id) const { return id_pool.count(db_id) || ood_pool.count(db_id); }
};

// Seeded shuffle of the sorted ids; the first ceil(0.75 n) (clamped so both
// pools are non-empty) form the in-domain pool. Requires at least 2 ids.
CorpusPartition partition_databases(const std::set<std::string>& db_ids, std::uint64_t seed);

void write_partition_manifest(const CorpusPartition& partition, const std::filesystem::path& path);
CorpusPartition read_partition_manifest(const std::filesystem::path& path);

// Drops (and logs) tasks whose db_id is in neither pool. Returns the count removed.
std::size_t reject_unpartitioned(Corpus& corpus, const CorpusPartition& partition);

}  // namespace structsql
