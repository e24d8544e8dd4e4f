#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace structsql::testing {

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Creates db_root/<db_id>/<db_id>.sqlite and runs `script` on it.
std::filesystem::path create_db(const std::filesystem::path& db_root, const std::string& db_id,
                                const std::string& script);

// A small film-rental database in the style of the BIRD movie schemas:
// film, category, film_category, actor, film_actor, language, plus a
// 10-row table `t` with mixed-type columns for comparison tests.
std::string film_db_script();

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

struct SyntheticTask {
    std::int64_t question_id = 0;
    std::string db_id;
    std::string question;
    std::string hint;
    std::string gold_sql;
    std::string difficulty;
    std::string category;  // what the generator intended
};

struct SyntheticCorpus {
    std::filesystem::path task_file;
    std::filesystem::path db_root;
    std::vector<SyntheticTask> tasks;
    std::map<std::string, std::string> gold_by_question;
};

/// Writes `n_dbs` databases named shop_00.. and a BIRD-style task file with
/// `per_category` tasks of each complexity category per database.
SyntheticCorpus make_synthetic_corpus(const std::filesystem::path& root, std::size_t n_dbs,
                                      std::size_t per_category);

}  // namespace structsql::testing
