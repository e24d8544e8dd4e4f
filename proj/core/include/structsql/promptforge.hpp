#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "structsql/types.hpp"

namespace structsql {

struct RenderedPrompt {
    PromptKind kind = PromptKind::QPCoT;
    std::string text;
    std::size_t token_estimate = 0;
};

enum class ExtractionNote { Clean, RecoveredFromFence, NoSqlFound };

std::string_view to_string(ExtractionNote n);
std::optional<ExtractionNote> parse_extraction_note(std::string_view s);

struct ExtractedOutput {
    std::string reasoning;
    std::optional<std::string> sql;
    ExtractionNote note = ExtractionNote::NoSqlFound;
};

// Raised when a slot value contains one of the template's section
// sentinels; such text would corrupt response extraction.
class PromptInjectionError : public Error {
public:
    using Error::Error;
};

std::string_view template_text(PromptKind kind);
std::string_view response_trailer(PromptKind kind);
std::size_t few_shot_count(PromptKind kind);

// Whitespace-separated word runs plus individual punctuation marks.
std::size_t estimate_tokens(std::string_view text);

RenderedPrompt render_prompt(PromptKind kind, std::string_view schema_text, std::string_view question,
                             std::string_view hint);

/// Splits a model response into reasoning and SQL. Never throws; failures
/// are reported through ExtractedOutput::note.
///
/// QPCoT: the last "## SQL Query:" marker separates reasoning from SQL.
/// UnstructuredCoT: the last line beginning with "SQL:" does.
/// FNGoldDirect: the whole response is SQL.
/// Without a marker, the last ``` or ```sql fenced block is taken as SQL
/// (RecoveredFromFence). Code fences and trailing semicolons are stripped.
ExtractedOutput extract_output(PromptKind kind, std::string_view response);

// Inverse of extract_output for well-formed inputs: lays out reasoning and
// SQL the way the kind's few-shot exemplars do.
std::string compose_response(PromptKind kind, std::string_view reasoning, std::string_view sql);

}  // namespace structsql
