#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "structsql/executor.hpp"
#include "structsql/promptforge.hpp"

namespace structsql {

enum class VerdictClass { Success, Gen, Syn, Sem };

enum class Subcategory {
    // Syn
    NoSuchColumn,
    NoSuchTable,
    KeywordIssue,
    SyntaxClauseOrder,
    SynOther,
    // Sem
    ColumnMismatch,
    RowMismatch,
    RowAndColumnMismatch,
    ValueMismatch,
    EmptyOutput,
};

struct Verdict {
    VerdictClass cls = VerdictClass::Success;
    std::optional<Subcategory> sub;
    std::string detail;

    bool operator==(const Verdict& o) const { return cls == o.cls && sub == o.sub; }
};

// Gen > Syn > Sem > Success.
int severity(VerdictClass c);

std::string_view to_string(VerdictClass c);
std::string_view to_string(Subcategory s);  // "Other" for SynOther
std::optional<VerdictClass> parse_verdict_class(std::string_view s);
std::optional<Subcategory> parse_subcategory(VerdictClass cls, std::string_view s);

// "Success", "Gen", "Syn.NoSuchColumn", "Sem.EmptyOutput", ...
std::string verdict_key(const Verdict& v);

bool is_syn_subcategory(Subcategory s);

// Bumped whenever a diagnostic rule changes, so reports from different rule
// sets are not compared by accident.
inline constexpr std::string_view kTaxonomyRulesVersion = "1";

// Classifies a failed execution's engine diagnostic into a Syn subcategory.
// `sql` is consulted only to tell an unbalanced-parenthesis failure apart
// from a misplaced keyword.
Subcategory classify_diagnostic(std::string_view diagnostic, std::string_view sql = {});

// Damerau (optimal string alignment) distance, case-insensitive.
std::size_t keyword_edit_distance(std::string_view a, std::string_view b);

// The checked-in SQLite keyword list, uppercase.
const std::vector<std::string>& sqlite_keywords();
bool is_sqlite_keyword(std::string_view word);

/// Assigns exactly one verdict. Preconditions: pred_exec is present iff
/// extraction found SQL; comparison is present iff pred_exec has Rows.
/// Violations throw std::invalid_argument.
Verdict classify(const ExtractedOutput& extracted, const ExecOutcome* pred_exec,
                 const ComparisonResult* comparison);

}  // namespace structsql
