#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

struct sqlite3;

namespace structsql {

struct Blob {
    std::vector<std::uint8_t> bytes;
    bool operator==(const Blob&) const = default;
    auto operator<=>(const Blob&) const = default;
};

// One SQLite cell. Comparison semantics live in compare_results, not here.
using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;
using Row = std::vector<Value>;

enum class ExecStatus { Rows, EngineError, Timeout };

struct ExecOutcome {
    ExecStatus status = ExecStatus::Rows;
    std::vector<Row> rows;
    std::size_t columns = 0;
    std::string diagnostic;  // engine error text, verbatim
    std::string note;        // why a Timeout-class outcome was produced ("timeout", "row cap")
    std::int64_t elapsed_ms = 0;

    bool ok() const { return status == ExecStatus::Rows; }
};

struct ExecLimits {
    double timeout_s = 30.0;
    std::size_t max_rows = 1'000'000;
};

/// Read-only SQLite connection. Not shareable across threads.
class SqliteConnection {
public:
    explicit SqliteConnection(const std::filesystem::path& db_file);
    ~SqliteConnection();
    SqliteConnection(SqliteConnection&& other) noexcept : db_(std::exchange(other.db_, nullptr)) {}
    SqliteConnection& operator=(SqliteConnection&& other) noexcept;
    SqliteConnection(const SqliteConnection&) = delete;
    SqliteConnection& operator=(const SqliteConnection&) = delete;

    ExecOutcome execute(std::string_view sql, const ExecLimits& limits = {}) const;

    sqlite3* handle() const { return db_; }

private:
    sqlite3* db_ = nullptr;
};

/// Resolves db_id to db_root/<db_id>/<db_id>.sqlite and runs queries on a
/// fresh read-only connection per call, so one Executor may be used from
/// many threads at once.
class Executor {
public:
    explicit Executor(std::filesystem::path db_root, ExecLimits limits = {})
        : db_root_(std::move(db_root)), limits_(limits) {}

    ExecOutcome execute_sql(const std::string& db_id, std::string_view sql) const;
    ExecOutcome execute_sql(const std::string& db_id, std::string_view sql, double timeout_s) const;

    std::filesystem::path database_path(const std::string& db_id) const;
    const ExecLimits& limits() const { return limits_; }

private:
    std::filesystem::path db_root_;
    ExecLimits limits_;
};

enum class ComparisonVerdict { Match, ColumnMismatch, RowMismatch, RowAndColumnMismatch, ValueMismatch, EmptyOutput };

std::string_view to_string(ComparisonVerdict v);
std::string_view to_string(ExecStatus s);

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool operator==(const Shape&) const = default;
};

struct ComparisonResult {
    ComparisonVerdict verdict = ComparisonVerdict::Match;
    Shape pred_shape;
    Shape gold_shape;
};

// Result sets are compared as multisets of full row tuples: column order
// matters, row order does not. Integral reals equal the matching integer,
// text compares byte-wise, NULL equals NULL. Both outcomes must be Rows
// (throws std::invalid_argument otherwise).
ComparisonResult compare_results(const ExecOutcome& pred, const ExecOutcome& gold);

// Canonical rendering used for logging and for JSON output of cells.
std::string render_value(const Value& v);

}  // namespace structsql
