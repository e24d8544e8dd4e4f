#include "structsql/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "embedded_resources.hpp"

namespace structsql {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

// Parenthesis balance outside string literals and quoted identifiers.
bool parens_balanced(std::string_view sql) {
    int depth = 0;
    char quote = 0;
    for (char c : sql) {
        if (quote) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') quote = c;
        else if (c == '(') ++depth;
        else if (c == ')' && --depth < 0) return false;
    }
    return depth == 0 && quote == 0;
}

std::optional<std::string> near_token(std::string_view diag) {
    const auto p = diag.find("near \"");
    if (p == std::string_view::npos) return std::nullopt;
    const auto start = p + 6;
    const auto end = diag.find("\":", start);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(diag.substr(start, end - start));
}

// Keywords that open a clause. One of these in an illegal position is a
// clause-order error rather than a keyword error.
bool starts_clause(std::string_view tok) {
    static constexpr std::string_view clauses[] = {"SELECT", "FROM",      "WHERE",  "GROUP",  "HAVING",
                                                   "ORDER",  "LIMIT",     "OFFSET", "UNION",  "INTERSECT",
                                                   "EXCEPT", "WINDOW",    "VALUES", "WITH",   "JOIN"};
    std::string up(tok);
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return std::find(std::begin(clauses), std::end(clauses), up) != std::end(clauses);
}

bool is_word(std::string_view t) {
    return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isalpha(c) || c == '_'; });
}

}  // namespace

int severity(VerdictClass c) {
    switch (c) {
    case VerdictClass::Success: return 0;
    case VerdictClass::Sem: return 1;
    case VerdictClass::Syn: return 2;
    case VerdictClass::Gen: return 3;
    }
    return -1;
}

std::string_view to_string(VerdictClass c) {
    switch (c) {
    case VerdictClass::Success: return "Success";
    case VerdictClass::Gen: return "Gen";
    case VerdictClass::Syn: return "Syn";
    case VerdictClass::Sem: return "Sem";
    }
    return "?";
}

std::string_view to_string(Subcategory s) {
    switch (s) {
    case Subcategory::NoSuchColumn: return "NoSuchColumn";
    case Subcategory::NoSuchTable: return "NoSuchTable";
    case Subcategory::KeywordIssue: return "KeywordIssue";
    case Subcategory::SyntaxClauseOrder: return "SyntaxClauseOrder";
    case Subcategory::SynOther: return "Other";
    case Subcategory::ColumnMismatch: return "ColumnMismatch";
    case Subcategory::RowMismatch: return "RowMismatch";
    case Subcategory::RowAndColumnMismatch: return "RowAndColumnMismatch";
    case Subcategory::ValueMismatch: return "ValueMismatch";
    case Subcategory::EmptyOutput: return "EmptyOutput";
    }
    return "?";
}

bool is_syn_subcategory(Subcategory s) {
    switch (s) {
    case Subcategory::NoSuchColumn:
    case Subcategory::NoSuchTable:
    case Subcategory::KeywordIssue:
    case Subcategory::SyntaxClauseOrder:
    case Subcategory::SynOther:
        return true;
    default:
        return false;
    }
}

std::optional<VerdictClass> parse_verdict_class(std::string_view s) {
    for (auto c : {VerdictClass::Success, VerdictClass::Gen, VerdictClass::Syn, VerdictClass::Sem})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Subcategory> parse_subcategory(VerdictClass cls, std::string_view s) {
    for (int i = 0; i <= static_cast<int>(Subcategory::EmptyOutput); ++i) {
        const auto sub = static_cast<Subcategory>(i);
        const bool syn = is_syn_subcategory(sub);
        if ((cls == VerdictClass::Syn && !syn) || (cls == VerdictClass::Sem && syn)) continue;
        if (cls != VerdictClass::Syn && cls != VerdictClass::Sem) continue;
        if (to_string(sub) == s) return sub;
    }
    return std::nullopt;
}

std::string verdict_key(const Verdict& v) {
    std::string key(to_string(v.cls));
    if (v.sub) {
        key += '.';
        key += to_string(*v.sub);
    }
    return key;
}

const std::vector<std::string>& sqlite_keywords() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> out;
        std::istringstream in{std::string(resources::kSqliteKeywords)};
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            for (auto& c : line) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            out.push_back(line);
        }
        std::sort(out.begin(), out.end());
        return out;
    }();
    return words;
}

bool is_sqlite_keyword(std::string_view word) {
    std::string up(word);
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    const auto& kw = sqlite_keywords();
    return std::binary_search(kw.begin(), kw.end(), up);
}

std::size_t keyword_edit_distance(std::string_view a_in, std::string_view b_in) {
    const auto a = lower(a_in);
    const auto b = lower(b_in);
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
                d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
        }
    }
    return d[n][m];
}

Subcategory classify_diagnostic(std::string_view diagnostic, std::string_view sql) {
    const auto diag = lower(diagnostic);
    if (contains(diag, "no such column")) return Subcategory::NoSuchColumn;
    if (contains(diag, "no such table")) return Subcategory::NoSuchTable;

    if (const auto tok = near_token(diagnostic); tok && contains(diag, "syntax error") && is_word(*tok)) {
        if (is_sqlite_keyword(*tok)) {
            // A keyword only looks misplaced when a missing paren shifted it.
            if (!starts_clause(*tok) && (sql.empty() || parens_balanced(sql))) return Subcategory::KeywordIssue;
        } else {
            // Misspelt keyword. Short identifiers sit within two edits of
            // many keywords, so the distance must stay under half the length.
            for (const auto& kw : sqlite_keywords()) {
                const auto dist = keyword_edit_distance(*tok, kw);
                if (dist <= 2 && 2 * dist < tok->size()) return Subcategory::KeywordIssue;
            }
        }
    }

    if (contains(diag, "syntax error") || contains(diag, "incomplete input") ||
        contains(diag, "unrecognized token") || contains(diag, "unterminated"))
        return Subcategory::SyntaxClauseOrder;
    return Subcategory::SynOther;
}

namespace {

Subcategory sem_from(ComparisonVerdict v) {
    switch (v) {
    case ComparisonVerdict::ColumnMismatch: return Subcategory::ColumnMismatch;
    case ComparisonVerdict::RowMismatch: return Subcategory::RowMismatch;
    case ComparisonVerdict::RowAndColumnMismatch: return Subcategory::RowAndColumnMismatch;
    case ComparisonVerdict::ValueMismatch: return Subcategory::ValueMismatch;
    case ComparisonVerdict::EmptyOutput: return Subcategory::EmptyOutput;
    case ComparisonVerdict::Match: break;
    }
    throw std::logic_error("Match has no semantic subcategory");
}

std::string shape_detail(const ComparisonResult& c) {
    return "pred " + std::to_string(c.pred_shape.rows) + "x" + std::to_string(c.pred_shape.cols) + " vs gold " +
           std::to_string(c.gold_shape.rows) + "x" + std::to_string(c.gold_shape.cols);
}

}  // namespace

Verdict classify(const ExtractedOutput& extracted, const ExecOutcome* pred_exec, const ComparisonResult* comparison) {
    Verdict v;
    if (extracted.note == ExtractionNote::NoSqlFound) {
        if (pred_exec || comparison) throw std::invalid_argument("execution supplied for an output without SQL");
        v.cls = VerdictClass::Gen;
        v.detail = "no SQL output";
        return v;
    }
    if (!pred_exec) throw std::invalid_argument("extracted SQL was not executed");

    if (pred_exec->status == ExecStatus::Timeout) {
        if (comparison) throw std::invalid_argument("comparison supplied for a failed execution");
        v.cls = VerdictClass::Syn;
        v.sub = Subcategory::SynOther;
        v.detail = pred_exec->note.empty() ? "timeout" : pred_exec->note;
        return v;
    }
    if (pred_exec->status == ExecStatus::EngineError) {
        if (comparison) throw std::invalid_argument("comparison supplied for a failed execution");
        v.cls = VerdictClass::Syn;
        v.sub = classify_diagnostic(pred_exec->diagnostic, extracted.sql.value_or(""));
        v.detail = pred_exec->diagnostic;
        return v;
    }
    if (!comparison) throw std::invalid_argument("successful execution without a comparison");
    if (comparison->verdict == ComparisonVerdict::Match) {
        v.cls = VerdictClass::Success;
        return v;
    }
    v.cls = VerdictClass::Sem;
    v.sub = sem_from(comparison->verdict);
    v.detail = shape_detail(*comparison);
    return v;
}

}  // namespace structsql
