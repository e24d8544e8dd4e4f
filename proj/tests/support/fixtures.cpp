#include "fixtures.hpp"

#include <sqlite3.h>
#include <stdlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace structsql::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    auto tmpl = (fs::temp_directory_path() / "structsql_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path create_db(const fs::path& db_root, const std::string& db_id, const std::string& script) {
    const auto dir = db_root / db_id;
    fs::create_directories(dir);
    const auto file = dir / (db_id + ".sqlite");
    fs::remove(file);
    sqlite3* db = nullptr;
    if (sqlite3_open(file.c_str(), &db) != SQLITE_OK) throw std::runtime_error("cannot create " + file.string());
    char* err = nullptr;
    const int rc = sqlite3_exec(db, script.c_str(), nullptr, nullptr, &err);
    std::string msg = err ? err : "";
    sqlite3_free(err);
    sqlite3_close(db);
    if (rc != SQLITE_OK) throw std::runtime_error("fixture script failed: " + msg);
    return file;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string film_db_script() {
    std::ostringstream s;
    s << R"(
CREATE TABLE language (
    language_id INTEGER PRIMARY KEY,
    name TEXT NOT NULL
);
CREATE TABLE film (
    film_id INTEGER PRIMARY KEY,
    title TEXT NOT NULL,
    description TEXT,
    release_year INTEGER,
    language_id INTEGER REFERENCES language(language_id),
    length INTEGER,
    rating TEXT,
    rental_rate REAL
);
CREATE TABLE category (
    category_id INTEGER PRIMARY KEY,
    name TEXT NOT NULL
);
CREATE TABLE film_category (
    film_id INTEGER NOT NULL REFERENCES film(film_id),
    category_id INTEGER NOT NULL REFERENCES category(category_id),
    PRIMARY KEY (film_id, category_id)
);
CREATE TABLE actor (
    actor_id INTEGER PRIMARY KEY,
    first_name TEXT NOT NULL,
    last_name TEXT NOT NULL
);
CREATE TABLE film_actor (
    actor_id INTEGER NOT NULL REFERENCES actor(actor_id),
    film_id INTEGER NOT NULL REFERENCES film(film_id),
    PRIMARY KEY (actor_id, film_id)
);
CREATE TABLE t (a INTEGER, b REAL, c TEXT, d);
INSERT INTO language VALUES (1, 'English'), (2, 'Italian'), (3, 'Japanese');
INSERT INTO category VALUES (1, 'Action'), (2, 'Comedy'), (3, 'Drama'), (4, 'Horror'), (5, 'Sci-Fi');
INSERT INTO actor VALUES (1, 'PENELOPE', 'GUINESS'), (2, 'NICK', 'WAHLBERG'), (3, 'ED', 'CHASE'),
    (4, 'JENNIFER', 'DAVIS'), (5, 'JOHNNY', 'LOLLOBRIGIDA'), (6, 'BETTE', 'NICHOLSON'),
    (7, 'GRACE', 'MOSTEL'), (8, 'MATTHEW', 'JOHANSSON');
)";
    static const char* titles[] = {"ACADEMY DINOSAUR", "ACE GOLDFINGER", "ADAPTATION HOLES", "AFFAIR PREJUDICE",
                                   "AGENT TRUMAN",     "AIRPLANE SIERRA", "AIRPORT POLLOCK", "ALABAMA DEVIL",
                                   "ALADDIN CALENDAR", "ALAMO VIDEOTAPE", "ALASKA PHANTOM",  "ALI FOREVER"};
    static const char* ratings[] = {"PG", "G", "NC-17", "R", "PG-13"};
    for (int i = 0; i < 12; ++i) {
        s << "INSERT INTO film VALUES (" << i + 1 << ", '" << titles[i] << "', 'A story about film " << i + 1
          << "', " << 2000 + i % 4 << ", " << 1 + i % 3 << ", " << 60 + (i * 17) % 120 << ", '" << ratings[i % 5]
          << "', " << (i % 3 == 0 ? "0.99" : i % 3 == 1 ? "2.99" : "4.99") << ");\n";
        s << "INSERT INTO film_category VALUES (" << i + 1 << ", " << 1 + (i * 3) % 5 << ");\n";
        if (i % 4 == 0) s << "INSERT INTO film_category VALUES (" << i + 1 << ", " << 1 + (i * 3 + 1) % 5 << ");\n";
    }
    for (int a = 1; a <= 8; ++a)
        for (int f = 1; f <= 12; ++f)
            if ((a * f) % 5 == 1 || (a + f) % 7 == 0) s << "INSERT INTO film_actor VALUES (" << a << ", " << f << ");\n";
    s << R"(
INSERT INTO t VALUES (1, 1.0, 'x', NULL);
INSERT INTO t VALUES (2, 2.5, 'y', 2);
INSERT INTO t VALUES (3, 3.0, 'x', 'three');
INSERT INTO t VALUES (4, NULL, 'z', 4.0);
INSERT INTO t VALUES (5, 5.5, NULL, X'0102');
INSERT INTO t VALUES (1, 1.0, 'x', NULL);
INSERT INTO t VALUES (NULL, 7.0, 'w', 7);
INSERT INTO t VALUES (8, 8.0, 'y', 'eight');
INSERT INTO t VALUES (9, -1.5, 'x', 9);
INSERT INTO t VALUES (10, 10.0, 'v', 10.5);
)";
    return s.str();
}

namespace {

std::string shop_script(std::size_t k) {
    std::ostringstream s;
    s << "CREATE TABLE items (id INTEGER PRIMARY KEY, name TEXT NOT NULL, grp INTEGER, val INTEGER);\n"
         "CREATE TABLE events (id INTEGER PRIMARY KEY, item_id INTEGER REFERENCES items(id), score INTEGER);\n"
         "BEGIN;\n";
    for (std::size_t i = 1; i <= 40; ++i)
        s << "INSERT INTO items VALUES (" << i << ", 'item_" << k << "_" << i << "', " << (i * 3 + k) % 5 << ", "
          << (i * 37 + k * 11) % 100 << ");\n";
    for (std::size_t e = 1; e <= 120; ++e)
        s << "INSERT INTO events VALUES (" << e << ", " << 1 + (e * 7 + k) % 40 << ", " << (e * 13 + k * 5) % 100
          << ");\n";
    s << "COMMIT;\n";
    return s.str();
}

std::string fill(std::string tmpl, const std::map<std::string, std::string>& vars) {
    for (const auto& [key, value] : vars) {
        const std::string slot = "{" + key + "}";
        for (auto p = tmpl.find(slot); p != std::string::npos; p = tmpl.find(slot, p + value.size()))
            tmpl.replace(p, slot.size(), value);
    }
    return tmpl;
}

struct Template {
    const char* question;
    const char* sql;
};

const Template kSingle[] = {
    {"Which items have a value above {v}?", "SELECT name FROM items WHERE val > {v}"},
    {"How many items are in group {g}?", "SELECT COUNT(*) FROM items WHERE grp = {g}"},
    {"What is the average value per group for items valued below {v}?",
     "SELECT grp, AVG(val) FROM items WHERE val < {v} GROUP BY grp"},
    {"List the top {l} items of group {g} by value.",
     "SELECT name, val FROM items WHERE grp = {g} ORDER BY val DESC LIMIT {l}"},
};
const Template kSubquery[] = {
    {"Which items are worth more than the group {g} average?",
     "SELECT name FROM items WHERE val > (SELECT AVG(val) FROM items WHERE grp = {g})"},
    {"Which items logged an event scoring above {v}?",
     "SELECT name FROM items WHERE id IN (SELECT item_id FROM events WHERE score > {v})"},
    {"How many items have at least one event scoring {v} or more?",
     "SELECT COUNT(*) FROM items WHERE EXISTS (SELECT 1 FROM events WHERE events.item_id = items.id AND "
     "events.score >= {v})"},
    {"What is the highest value outside group {g}?",
     "SELECT MAX(val) FROM (SELECT val FROM items WHERE grp <> {g})"},
};
const Template kJoin[] = {
    {"Show item names with event scores above {v}.",
     "SELECT items.name, events.score FROM items JOIN events ON items.id = events.item_id WHERE events.score > {v}"},
    {"Count events per group for items valued under {v}.",
     "SELECT i.grp, COUNT(e.id) FROM items AS i INNER JOIN events AS e ON e.item_id = i.id WHERE i.val < {v} "
     "GROUP BY i.grp"},
    {"Which items are in group {g} or valued above {v}?",
     "SELECT name FROM items WHERE grp = {g} UNION SELECT name FROM items WHERE val > {v}"},
    {"Which items have an event with score exactly {v}?",
     "SELECT T1.name FROM items AS T1, events AS T2 WHERE T1.id = T2.item_id AND T2.score = {v}"},
};
const Template kJoinSub[] = {
    {"Which items have events scoring above the average for bucket {g}?",
     "SELECT T1.name FROM items AS T1 JOIN events AS T2 ON T1.id = T2.item_id WHERE T2.score > (SELECT "
     "AVG(score) FROM events WHERE item_id % 5 = {g})"},
    {"Which items scored above {v} once but are not in group {g}?",
     "SELECT name FROM items WHERE id IN (SELECT item_id FROM events WHERE score > {v}) EXCEPT SELECT name FROM "
     "items WHERE grp = {g}"},
    {"Total low scores below {v} per group.",
     "SELECT T1.grp, SUM(T2.score) FROM items AS T1 JOIN (SELECT item_id, score FROM events WHERE score < {v}) AS "
     "T2 ON T1.id = T2.item_id GROUP BY T1.grp"},
    {"Which items have an event scoring at least {v}?",
     "WITH top AS (SELECT item_id FROM events WHERE score >= {v}) SELECT items.name FROM items JOIN top ON "
     "top.item_id = items.id"},
};

}  // namespace

SyntheticCorpus make_synthetic_corpus(const fs::path& root, std::size_t n_dbs, std::size_t per_category) {
    SyntheticCorpus corpus;
    corpus.db_root = root / "databases";
    corpus.task_file = root / "tasks.json";

    static const char* difficulties[] = {"simple", "moderate", "challenging"};
    struct Family {
        const char* name;
        const Template* templates;
    };
    const Family families[] = {
        {"SingleTable", kSingle}, {"SubqueryOnly", kSubquery}, {"JoinSetOpOnly", kJoin},
        {"JoinSetOpAndSubquery", kJoinSub}};

    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    std::int64_t qid = 0;
    for (std::size_t k = 0; k < n_dbs; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "shop_%02zu", k);
        const std::string db_id = name;
        create_db(corpus.db_root, db_id, shop_script(k));
        for (const auto& fam : families) {
            for (std::size_t i = 0; i < per_category; ++i) {
                const auto& t = fam.templates[i % 4];
                const std::map<std::string, std::string> vars = {{"v", std::to_string((i * 7 + k) % 100)},
                                                                 {"g", std::to_string(i % 5)},
                                                                 {"l", std::to_string(1 + i % 10)}};
                SyntheticTask task;
                task.question_id = qid++;
                task.db_id = db_id;
                task.question = "[" + db_id + " #" + std::to_string(task.question_id) + "] " + fill(t.question, vars);
                task.hint = i % 2 ? "value refers to val; group refers to grp" : "";
                task.gold_sql = fill(t.sql, vars);
                task.difficulty = difficulties[i % 3];
                task.category = fam.name;
                corpus.gold_by_question[task.question] = task.gold_sql;
                items.push_back({{"question_id", task.question_id},
                                 {"db_id", task.db_id},
                                 {"question", task.question},
                                 {"evidence", task.hint},
                                 {"SQL", task.gold_sql},
                                 {"difficulty", task.difficulty}});
                corpus.tasks.push_back(std::move(task));
            }
        }
    }
    write_file(corpus.task_file, items.dump(1));
    return corpus;
}

}  // namespace structsql::testing
