#include "structsql/corpus.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "structsql/executor.hpp"
#include "structsql/log.hpp"
#include "structsql/rng.hpp"
#include "structsql/taxonomy.hpp"

namespace structsql {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Statement {
public:
    Statement(sqlite3* db, const std::string& sql) {
        if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) {
            std::string msg = sqlite3_errmsg(db);
            sqlite3_finalize(stmt_);
            stmt_ = nullptr;
            throw Error("metadata query failed (" + sql + "): " + msg);
        }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    bool step() { return sqlite3_step(stmt_) == SQLITE_ROW; }
    std::string text(int i) const {
        const auto* p = sqlite3_column_text(stmt_, i);
        return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)))
                 : std::string();
    }
    int integer(int i) const { return sqlite3_column_int(stmt_, i); }
    int type(int i) const { return sqlite3_column_type(stmt_, i); }

private:
    sqlite3_stmt* stmt_ = nullptr;
};

std::string quote_sql_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

bool simple_identifier(const std::string& name) {
    if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    for (unsigned char c : name)
        if (!(std::isalnum(c) || c == '_')) return false;
    return !is_sqlite_keyword(name);
}

// BIRD-style rendering: backticks around anything that is not a plain identifier.
std::string ddl_name(const std::string& name) {
    if (simple_identifier(name)) return name;
    std::string out = "`";
    for (char c : name) {
        if (c == '`') out += '`';
        out += c;
    }
    return out + "`";
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') quoted = true;
        else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

void attach_descriptions(TableInfo& table, const fs::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) return;
    std::stringstream buf;
    buf << in.rdbuf();
    const auto rows = parse_csv(buf.str());
    if (rows.empty()) return;
    int name_col = -1, desc_col = -1;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        const auto h = lower(trim(rows[0][i]));
        if (h == "original_column_name") name_col = static_cast<int>(i);
        if (h == "column_description") desc_col = static_cast<int>(i);
    }
    if (name_col < 0 || desc_col < 0) return;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= static_cast<std::size_t>(std::max(name_col, desc_col))) continue;
        const auto key = lower(trim(row[static_cast<std::size_t>(name_col)]));
        for (auto& col : table.columns)
            if (lower(col.name) == key) col.description = trim(row[static_cast<std::size_t>(desc_col)]);
    }
}

std::string example_text(std::string v) {
    for (auto& c : v)
        if (c == '\n' || c == '\r') c = ' ';
    constexpr std::size_t kMax = 50;
    if (v.size() > kMax) v = v.substr(0, kMax) + "...";
    return v;
}

void read_examples(sqlite3* db, TableInfo& table, std::size_t max_examples) {
    if (max_examples == 0) return;
    for (auto& col : table.columns) {
        const std::string sql = "SELECT " + quote_sql_ident(col.name) + " FROM " + quote_sql_ident(table.name) +
                                " WHERE " + quote_sql_ident(col.name) + " IS NOT NULL LIMIT 50";
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
            sqlite3_finalize(stmt);
            continue;
        }
        while (col.value_examples.size() < max_examples && sqlite3_step(stmt) == SQLITE_ROW) {
            if (sqlite3_column_type(stmt, 0) == SQLITE_BLOB) break;
            const auto* p = sqlite3_column_text(stmt, 0);
            std::string v(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt, 0)));
            v = example_text(std::move(v));
            if (std::find(col.value_examples.begin(), col.value_examples.end(), v) == col.value_examples.end())
                col.value_examples.push_back(std::move(v));
        }
        sqlite3_finalize(stmt);
    }
}

std::string render_ddl(const SchemaDescriptor& db) {
    std::string out;
    for (const auto& t : db.tables) {
        if (!out.empty()) out += "\n\n";
        out += "CREATE TABLE " + ddl_name(t.name) + " (\n";
        const auto pk_cols = std::count_if(t.columns.begin(), t.columns.end(),
                                           [](const ColumnInfo& c) { return c.pk_position > 0; });
        std::vector<std::string> lines;
        for (const auto& c : t.columns) {
            std::string line = "    " + ddl_name(c.name);
            if (!c.type.empty()) line += " " + c.type;
            line += c.not_null ? " not null" : " null";
            if (pk_cols == 1 && c.pk_position > 0) line += " primary key";
            lines.push_back(std::move(line));
        }
        if (pk_cols > 1) {
            std::vector<const ColumnInfo*> pk;
            for (const auto& c : t.columns)
                if (c.pk_position > 0) pk.push_back(&c);
            std::sort(pk.begin(), pk.end(), [](auto* a, auto* b) { return a->pk_position < b->pk_position; });
            std::string line = "    primary key (";
            for (std::size_t i = 0; i < pk.size(); ++i) line += (i ? ", " : "") + ddl_name(pk[i]->name);
            lines.push_back(line + ")");
        }
        for (const auto& fk : t.foreign_keys) {
            std::string line = "    foreign key (" + ddl_name(fk.from_column) + ") references " + ddl_name(fk.to_table);
            if (!fk.to_column.empty()) line += " (" + ddl_name(fk.to_column) + ")";
            lines.push_back(std::move(line));
        }
        for (std::size_t i = 0; i < lines.size(); ++i) out += lines[i] + (i + 1 < lines.size() ? ",\n" : "\n");
        out += ")";
    }
    return out;
}

std::string render_commented(const SchemaDescriptor& db) {
    std::string out;
    for (const auto& t : db.tables) {
        if (!out.empty()) out += "\n\n";
        out += "Table: " + t.name;
        for (const auto& c : t.columns) {
            out += "\nColumn " + c.name + ": column description -> " + (c.description.empty() ? c.name : c.description);
            if (!c.value_examples.empty()) {
                out += ", value examples -> [";
                for (std::size_t i = 0; i < c.value_examples.size(); ++i) out += (i ? ", " : "") + c.value_examples[i];
                out += "]";
            }
        }
    }
    return out;
}

std::string json_string_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) throw Error(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

}  // namespace

SchemaDescriptor load_schema(const std::string& db_id, const fs::path& db_file, const SchemaLoadOptions& options) {
    SqliteConnection conn(db_file);
    sqlite3* db = conn.handle();
    SchemaDescriptor sd;
    sd.db_id = db_id;

    std::vector<std::string> names;
    {
        Statement s(db, "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' "
                        "ORDER BY rowid");
        while (s.step()) names.push_back(s.text(0));
    }
    for (const auto& name : names) {
        TableInfo t;
        t.name = name;
        {
            Statement s(db, "PRAGMA table_info(" + quote_sql_ident(name) + ")");
            while (s.step()) {
                ColumnInfo c;
                c.name = s.text(1);
                c.type = s.text(2);
                c.not_null = s.integer(3) != 0;
                c.pk_position = s.integer(5);
                t.columns.push_back(std::move(c));
            }
        }
        {
            Statement s(db, "PRAGMA foreign_key_list(" + quote_sql_ident(name) + ")");
            while (s.step()) t.foreign_keys.push_back({s.text(3), s.text(2), s.text(4)});
            std::sort(t.foreign_keys.begin(), t.foreign_keys.end(), [](const ForeignKey& a, const ForeignKey& b) {
                return std::tie(a.from_column, a.to_table, a.to_column) < std::tie(b.from_column, b.to_table, b.to_column);
            });
        }
        if (options.read_descriptions)
            attach_descriptions(t, db_file.parent_path() / "database_description" / (name + ".csv"));
        read_examples(db, t, options.max_value_examples);
        sd.tables.push_back(std::move(t));
    }
    sd.ddl_text = render_ddl(sd);
    sd.commentary_text = render_commented(sd);
    if (sd.tables.empty()) log::warn("database '" + db_id + "' has no tables; schema text is empty");
    return sd;
}

std::string serialize_schema(const SchemaDescriptor& db, SchemaStyle style) {
    if (db.tables.empty()) {
        log::warn("serializing empty schema for '" + db.db_id + "'");
        return {};
    }
    return style == SchemaStyle::DDL ? render_ddl(db) : render_commented(db);
}

const SchemaDescriptor& Corpus::schema(const std::string& db_id) const {
    const auto it = schemas.find(db_id);
    if (it == schemas.end()) throw Error("unknown db_id '" + db_id + "'");
    return it->second;
}

std::set<std::string> Corpus::db_ids() const {
    std::set<std::string> out;
    for (const auto& [id, _] : schemas) out.insert(id);
    return out;
}

Corpus load_corpus(const fs::path& task_file, const fs::path& db_root, const SchemaLoadOptions& options) {
    std::ifstream in(task_file);
    if (!in) throw Error("cannot read task file " + task_file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("task file " + task_file.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw Error("task file " + task_file.string() + " must contain a JSON array");

    Corpus corpus;
    corpus.report.items_in_file = doc.size();
    std::map<std::string, SqliteConnection> connections;

    for (std::size_t index = 0; index < doc.size(); ++index) {
        const auto& item = doc[index];
        auto skip = [&](std::string reason) {
            log::warn("task item " + std::to_string(index) + " skipped: " + reason);
            corpus.report.skipped.push_back({index, std::move(reason)});
        };
        if (!item.is_object()) {
            skip("not a JSON object");
            continue;
        }
        TaskInstance task;
        try {
            task.db_id = json_string_field(item, "db_id");
            task.question = json_string_field(item, "question");
            task.hint = json_string_field(item, "evidence");
            if (task.hint.empty()) task.hint = json_string_field(item, "hint");
            task.gold_sql = json_string_field(item, "SQL");
            if (task.gold_sql.empty()) task.gold_sql = json_string_field(item, "gold_sql");
            if (const auto it = item.find("question_id"); it != item.end() && !it->is_null()) {
                if (!it->is_number_integer()) throw Error("field 'question_id' is not an integer");
                task.question_id = it->get<std::int64_t>();
            } else {
                task.question_id = static_cast<std::int64_t>(index);
            }
            const auto diff = json_string_field(item, "difficulty");
            if (diff.empty()) {
                task.difficulty = Difficulty::Simple;
                task.difficulty_missing = true;
            } else if (auto d = parse_difficulty(diff)) {
                task.difficulty = *d;
            } else {
                throw Error("unknown difficulty '" + diff + "'");
            }
        } catch (const std::exception& e) {
            skip(e.what());
            continue;
        }
        if (task.db_id.empty() || task.question.empty()) {
            skip("missing db_id or question");
            continue;
        }
        if (trim(task.gold_sql).empty()) {
            skip("empty gold SQL");
            continue;
        }

        auto conn_it = connections.find(task.db_id);
        if (conn_it == connections.end()) {
            const auto db_file = db_root / task.db_id / (task.db_id + ".sqlite");
            if (!fs::exists(db_file))
                throw Error("database for db_id '" + task.db_id + "' not found at " + db_file.string());
            corpus.schemas.emplace(task.db_id, load_schema(task.db_id, db_file, options));
            conn_it = connections.emplace(task.db_id, SqliteConnection(db_file)).first;
        }

        sqlite3_stmt* stmt = nullptr;
        const int rc = sqlite3_prepare_v2(conn_it->second.handle(), task.gold_sql.c_str(), -1, &stmt, nullptr);
        std::string err = rc == SQLITE_OK ? "" : sqlite3_errmsg(conn_it->second.handle());
        const bool empty_stmt = rc == SQLITE_OK && stmt == nullptr;
        sqlite3_finalize(stmt);
        if (rc != SQLITE_OK || empty_stmt) {
            skip("gold SQL does not prepare: " + (empty_stmt ? std::string("empty statement") : err));
            continue;
        }

        ++corpus.report.per_db[task.db_id];
        ++corpus.report.per_difficulty[task.difficulty];
        if (task.difficulty_missing) ++corpus.report.difficulty_missing;
        corpus.tasks.push_back(std::move(task));
    }
    if (corpus.report.difficulty_missing > 0)
        log::info(std::to_string(corpus.report.difficulty_missing) + " task(s) had no difficulty; recorded as Simple");
    return corpus;
}

CorpusPartition partition_databases(const std::set<std::string>& db_ids, std::uint64_t seed) {
    if (db_ids.size() < 2) throw Error("partition needs at least 2 databases, got " + std::to_string(db_ids.size()));
    std::vector<std::string> order(db_ids.begin(), db_ids.end());
    seeded_shuffle(std::span<std::string>(order), seed);

    const std::size_t n = order.size();
    auto n_id = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(n)));
    n_id = std::clamp<std::size_t>(n_id, 1, n - 1);

    CorpusPartition p;
    p.seed = seed;
    p.id_pool.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_id));
    p.ood_pool.insert(order.begin() + static_cast<std::ptrdiff_t>(n_id), order.end());
    return p;
}

void write_partition_manifest(const CorpusPartition& partition, const fs::path& path) {
    nlohmann::ordered_json j;
    j["seed"] = partition.seed;
    j["id_pool"] = std::vector<std::string>(partition.id_pool.begin(), partition.id_pool.end());
    j["ood_pool"] = std::vector<std::string>(partition.ood_pool.begin(), partition.ood_pool.end());
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write partition manifest " + path.string());
    out << j.dump(2) << '\n';
}

CorpusPartition read_partition_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read partition manifest " + path.string());
    try {
        const auto j = json::parse(in);
        CorpusPartition p;
        p.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& id : j.at("id_pool")) p.id_pool.insert(id.get<std::string>());
        for (const auto& id : j.at("ood_pool")) p.ood_pool.insert(id.get<std::string>());
        for (const auto& id : p.id_pool)
            if (p.ood_pool.count(id)) throw Error("db_id '" + id + "' appears in both pools");
        return p;
    } catch (const json::exception& e) {
        throw Error("malformed partition manifest " + path.string() + ": " + e.what());
    }
}

std::size_t reject_unpartitioned(Corpus& corpus, const CorpusPartition& partition) {
    const auto before = corpus.tasks.size();
    std::erase_if(corpus.tasks, [&](const TaskInstance& t) {
        if (partition.contains(t.db_id)) return false;
        log::warn("question " + std::to_string(t.question_id) + " rejected: db_id '" + t.db_id +
                  "' is in neither partition pool");
        return true;
    });
    return before - corpus.tasks.size();
}

}  // namespace structsql
