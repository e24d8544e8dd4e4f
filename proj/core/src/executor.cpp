#include "structsql/executor.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "structsql/types.hpp"

namespace structsql {

namespace {

using Clock = std::chrono::steady_clock;

struct ProgressState {
    Clock::time_point deadline;
    bool fired = false;
};

int progress_callback(void* arg) {
    auto* st = static_cast<ProgressState*>(arg);
    if (Clock::now() >= st->deadline) {
        st->fired = true;
        return 1;
    }
    return 0;
}

Value read_column(sqlite3_stmt* stmt, int i) {
    switch (sqlite3_column_type(stmt, i)) {
    case SQLITE_INTEGER:
        return static_cast<std::int64_t>(sqlite3_column_int64(stmt, i));
    case SQLITE_FLOAT:
        return sqlite3_column_double(stmt, i);
    case SQLITE_TEXT: {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, i));
        return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, i)));
    }
    case SQLITE_BLOB: {
        const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt, i));
        const auto n = static_cast<std::size_t>(sqlite3_column_bytes(stmt, i));
        return Blob{std::vector<std::uint8_t>(p, p + n)};
    }
    default:
        return std::monostate{};
    }
}

// Normalised cell used for multiset comparison. Reals with an exact
// integral value become integers; everything else keeps its storage class.
struct NormCell {
    int rank = 0;  // 0 null, 1 number, 2 text, 3 blob
    bool is_int = false;
    std::int64_t i = 0;
    double d = 0;
    std::string s;
    std::vector<std::uint8_t> b;

    auto operator<=>(const NormCell& o) const {
        if (rank != o.rank) return rank <=> o.rank;
        switch (rank) {
        case 1: {
            if (is_int && o.is_int) return i <=> o.i;
            const double a = is_int ? static_cast<double>(i) : d;
            const double c = o.is_int ? static_cast<double>(o.i) : o.d;
            if (a < c) return std::strong_ordering::less;
            if (a > c) return std::strong_ordering::greater;
            // equal as doubles but one is an integer that rounds: order int first
            return static_cast<int>(!is_int) <=> static_cast<int>(!o.is_int);
        }
        case 2: return s <=> o.s;
        case 3: return b <=> o.b;
        default: return std::strong_ordering::equal;
        }
    }
    bool operator==(const NormCell& o) const { return (*this <=> o) == 0; }
};

NormCell normalize(const Value& v) {
    NormCell c;
    if (std::holds_alternative<std::monostate>(v)) return c;
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
        c.rank = 1;
        c.is_int = true;
        c.i = *i;
        return c;
    }
    if (const auto* d = std::get_if<double>(&v)) {
        c.rank = 1;
        constexpr double lo = -9223372036854775808.0;
        constexpr double hi = 9223372036854775808.0;
        if (std::isfinite(*d) && std::trunc(*d) == *d && *d >= lo && *d < hi) {
            c.is_int = true;
            c.i = static_cast<std::int64_t>(*d);
        } else {
            c.d = *d;
        }
        return c;
    }
    if (const auto* s = std::get_if<std::string>(&v)) {
        c.rank = 2;
        c.s = *s;
        return c;
    }
    c.rank = 3;
    c.b = std::get<Blob>(v).bytes;
    return c;
}

std::vector<std::vector<NormCell>> sorted_rows(const std::vector<Row>& rows) {
    std::vector<std::vector<NormCell>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<NormCell> n;
        n.reserve(r.size());
        for (const auto& v : r) n.push_back(normalize(v));
        out.push_back(std::move(n));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

SqliteConnection::SqliteConnection(const std::filesystem::path& db_file) {
    if (!std::filesystem::exists(db_file)) throw Error("database file not found: " + db_file.string());
    const int rc = sqlite3_open_v2(db_file.c_str(), &db_, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw Error("cannot open " + db_file.string() + ": " + msg);
    }
}

SqliteConnection::~SqliteConnection() {
    if (db_) sqlite3_close(db_);
}

SqliteConnection& SqliteConnection::operator=(SqliteConnection&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close(db_);
        db_ = std::exchange(other.db_, nullptr);
    }
    return *this;
}

ExecOutcome SqliteConnection::execute(std::string_view sql, const ExecLimits& limits) const {
    ExecOutcome out;
    const auto start = Clock::now();
    auto finish = [&](ExecOutcome o) {
        o.elapsed_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        return o;
    };

    ProgressState progress;
    const auto budget = std::chrono::duration<double>(limits.timeout_s);
    progress.deadline = start + std::chrono::duration_cast<Clock::duration>(budget);
    sqlite3_progress_handler(db_, 1000, &progress_callback, &progress);

    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt, &tail);
    if (rc != SQLITE_OK) {
        out.status = progress.fired ? ExecStatus::Timeout : ExecStatus::EngineError;
        if (progress.fired) out.note = "timeout";
        else out.diagnostic = sqlite3_errmsg(db_);
        sqlite3_progress_handler(db_, 0, nullptr, nullptr);
        return finish(std::move(out));
    }
    if (!stmt) {
        sqlite3_progress_handler(db_, 0, nullptr, nullptr);
        out.status = ExecStatus::EngineError;
        out.diagnostic = "empty statement";
        return finish(std::move(out));
    }
    if (!sqlite3_stmt_readonly(stmt)) {
        sqlite3_finalize(stmt);
        sqlite3_progress_handler(db_, 0, nullptr, nullptr);
        out.status = ExecStatus::EngineError;
        out.diagnostic = "attempt to write a readonly database";
        return finish(std::move(out));
    }

    out.columns = static_cast<std::size_t>(sqlite3_column_count(stmt));
    const int ncol = static_cast<int>(out.columns);
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
        if (out.rows.size() >= limits.max_rows) {
            rc = SQLITE_ABORT;
            out.note = "row cap";
            break;
        }
        Row row;
        row.reserve(out.columns);
        for (int i = 0; i < ncol; ++i) row.push_back(read_column(stmt, i));
        out.rows.push_back(std::move(row));
    }
    std::string err = rc == SQLITE_DONE ? "" : sqlite3_errmsg(db_);
    sqlite3_finalize(stmt);
    sqlite3_progress_handler(db_, 0, nullptr, nullptr);

    if (rc == SQLITE_DONE) return finish(std::move(out));
    out.rows.clear();
    if (!out.note.empty()) {
        out.status = ExecStatus::Timeout;
    } else if (progress.fired || rc == SQLITE_INTERRUPT) {
        out.status = ExecStatus::Timeout;
        out.note = "timeout";
    } else {
        out.status = ExecStatus::EngineError;
        out.diagnostic = std::move(err);
    }
    return finish(std::move(out));
}

std::filesystem::path Executor::database_path(const std::string& db_id) const {
    return db_root_ / db_id / (db_id + ".sqlite");
}

ExecOutcome Executor::execute_sql(const std::string& db_id, std::string_view sql) const {
    return execute_sql(db_id, sql, limits_.timeout_s);
}

ExecOutcome Executor::execute_sql(const std::string& db_id, std::string_view sql, double timeout_s) const {
    SqliteConnection conn(database_path(db_id));
    ExecLimits lim = limits_;
    lim.timeout_s = timeout_s;
    return conn.execute(sql, lim);
}

std::string_view to_string(ComparisonVerdict v) {
    switch (v) {
    case ComparisonVerdict::Match: return "Match";
    case ComparisonVerdict::ColumnMismatch: return "ColumnMismatch";
    case ComparisonVerdict::RowMismatch: return "RowMismatch";
    case ComparisonVerdict::RowAndColumnMismatch: return "RowAndColumnMismatch";
    case ComparisonVerdict::ValueMismatch: return "ValueMismatch";
    case ComparisonVerdict::EmptyOutput: return "EmptyOutput";
    }
    return "?";
}

std::string_view to_string(ExecStatus s) {
    switch (s) {
    case ExecStatus::Rows: return "Rows";
    case ExecStatus::EngineError: return "EngineError";
    case ExecStatus::Timeout: return "Timeout";
    }
    return "?";
}

ComparisonResult compare_results(const ExecOutcome& pred, const ExecOutcome& gold) {
    if (!pred.ok() || !gold.ok()) throw std::invalid_argument("compare_results requires two Rows outcomes");
    ComparisonResult r;
    r.pred_shape = {pred.rows.size(), pred.columns};
    r.gold_shape = {gold.rows.size(), gold.columns};

    const bool cols_differ = pred.columns != gold.columns;
    const bool rows_differ = pred.rows.size() != gold.rows.size();
    if (pred.rows.empty() && !gold.rows.empty()) r.verdict = ComparisonVerdict::EmptyOutput;
    else if (cols_differ && rows_differ) r.verdict = ComparisonVerdict::RowAndColumnMismatch;
    else if (cols_differ) r.verdict = ComparisonVerdict::ColumnMismatch;
    else if (rows_differ) r.verdict = ComparisonVerdict::RowMismatch;
    else if (sorted_rows(pred.rows) != sorted_rows(gold.rows)) r.verdict = ComparisonVerdict::ValueMismatch;
    else r.verdict = ComparisonVerdict::Match;
    return r;
}

std::string render_value(const Value& v) {
    if (std::holds_alternative<std::monostate>(v)) return "NULL";
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out = "X'";
    for (auto byte : std::get<Blob>(v).bytes) {
        out.push_back(hex[byte >> 4]);
        out.push_back(hex[byte & 0xF]);
    }
    out += "'";
    return out;
}

}  // namespace structsql
