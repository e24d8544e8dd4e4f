#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace structsql {

enum class Difficulty { Simple, Moderate, Challenging };

enum class PromptKind { QPCoT, UnstructuredCoT, FNGoldDirect };

enum class ComplexityCategory { SingleTable, SubqueryOnly, JoinSetOpOnly, JoinSetOpAndSubquery };

enum class Split { Train, IDVal, OODVal };

inline constexpr ComplexityCategory kAllCategories[] = {
    ComplexityCategory::SingleTable,
    ComplexityCategory::SubqueryOnly,
    ComplexityCategory::JoinSetOpOnly,
    ComplexityCategory::JoinSetOpAndSubquery,
};

inline constexpr Difficulty kAllDifficulties[] = {
    Difficulty::Simple,
    Difficulty::Moderate,
    Difficulty::Challenging,
};

std::string_view to_string(Difficulty d);
std::string_view to_string(PromptKind k);
std::string_view to_string(ComplexityCategory c);
std::string_view to_string(Split s);

// Parsers accept the canonical names produced by to_string. Difficulty and
// PromptKind also accept the lowercase spellings used in BIRD files and on
// the command line ("simple", "qpcot", "cot", "direct").
std::optional<Difficulty> parse_difficulty(std::string_view s);
std::optional<PromptKind> parse_prompt_kind(std::string_view s);
std::optional<ComplexityCategory> parse_category(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

// Fatal pipeline error. Carries a message intended for the operator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace structsql
