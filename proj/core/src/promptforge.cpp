#include "structsql/promptforge.hpp"

#include <cctype>
#include <vector>

#include "embedded_resources.hpp"

namespace structsql {

namespace {

constexpr std::string_view kQpMarker = "## SQL Query:";
constexpr std::string_view kCotMarker = "SQL:";
constexpr std::string_view kFence = "```";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string clean_sql(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.back() == ';' || std::isspace(static_cast<unsigned char>(s.back())))) s.remove_suffix(1);
    return std::string(s);
}

struct FencedBlock {
    std::size_t open = 0;  // offset of the opening ```
    std::string_view body;
};

bool accepted_info(std::string_view info) {
    info = trim(info);
    if (info.empty()) return true;
    if (info.size() != 3) return false;
    return std::tolower(static_cast<unsigned char>(info[0])) == 's' &&
           std::tolower(static_cast<unsigned char>(info[1])) == 'q' &&
           std::tolower(static_cast<unsigned char>(info[2])) == 'l';
}

// Fences pair up in order of appearance. Only untagged and sql-tagged
// blocks are returned; an unclosed final opener runs to end of text.
std::vector<FencedBlock> fenced_blocks(std::string_view text) {
    std::vector<FencedBlock> out;
    std::size_t pos = 0;
    while ((pos = text.find(kFence, pos)) != std::string_view::npos) {
        const std::size_t open = pos;
        std::size_t line_end = text.find('\n', open + kFence.size());
        const bool has_newline = line_end != std::string_view::npos;
        if (!has_newline) line_end = text.size();
        const auto info = text.substr(open + kFence.size(), line_end - open - kFence.size());
        const std::size_t body_start = has_newline ? line_end + 1 : text.size();
        const std::size_t close = text.find(kFence, body_start);
        const std::size_t body_end = close == std::string_view::npos ? text.size() : close;
        if (accepted_info(info)) out.push_back({open, text.substr(body_start, body_end - body_start)});
        if (close == std::string_view::npos) break;
        pos = close + kFence.size();
    }
    return out;
}

std::string sql_from_payload(std::string_view payload) {
    const auto blocks = fenced_blocks(payload);
    if (!blocks.empty()) return clean_sql(blocks.front().body);
    return clean_sql(payload);
}

std::size_t find_last_line_initial(std::string_view text, std::string_view marker) {
    std::size_t found = std::string_view::npos;
    std::size_t line = 0;
    while (line <= text.size()) {
        std::size_t p = line;
        while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
        if (text.substr(p, marker.size()) == marker) found = p;
        const auto nl = text.find('\n', line);
        if (nl == std::string_view::npos) break;
        line = nl + 1;
    }
    return found;
}

bool has_line_initial(std::string_view text, std::string_view marker) {
    return find_last_line_initial(text, marker) != std::string_view::npos;
}

void check_slot(PromptKind kind, std::string_view name, std::string_view value) {
    static constexpr std::string_view sentinels[] = {"### Response:", kQpMarker, "A: Let's think step by step."};
    for (auto s : sentinels) {
        if (value.find(s) != std::string_view::npos)
            throw PromptInjectionError("prompt slot '" + std::string(name) + "' contains reserved section marker \"" +
                                       std::string(s) + "\"");
    }
    if (kind == PromptKind::UnstructuredCoT && has_line_initial(value, kCotMarker))
        throw PromptInjectionError("prompt slot '" + std::string(name) + "' contains a line starting with \"SQL:\"");
}

std::string substitute(std::string_view tmpl, std::string_view schema, std::string_view question,
                       std::string_view hint, std::string_view hint_section) {
    std::string out;
    out.reserve(tmpl.size() + schema.size() + question.size() + hint.size() + 32);
    std::size_t pos = 0;
    for (;;) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const auto name = tmpl.substr(open + 2, close - open - 2);
        std::string_view value;
        bool known = true;
        if (name == "SCHEMA") value = schema;
        else if (name == "QUESTION") value = question;
        else if (name == "HINT") value = hint;
        else if (name == "HINT_SECTION") value = hint_section;
        else known = false;
        out.append(tmpl.substr(pos, open - pos));
        if (known) out.append(value);
        else out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

}  // namespace

std::string_view to_string(ExtractionNote n) {
    switch (n) {
    case ExtractionNote::Clean: return "Clean";
    case ExtractionNote::RecoveredFromFence: return "RecoveredFromFence";
    case ExtractionNote::NoSqlFound: return "NoSqlFound";
    }
    return "?";
}

std::optional<ExtractionNote> parse_extraction_note(std::string_view s) {
    for (auto n : {ExtractionNote::Clean, ExtractionNote::RecoveredFromFence, ExtractionNote::NoSqlFound})
        if (to_string(n) == s) return n;
    return std::nullopt;
}

std::string_view template_text(PromptKind kind) {
    switch (kind) {
    case PromptKind::QPCoT: return resources::kQpCotTemplate;
    case PromptKind::UnstructuredCoT: return resources::kCotTemplate;
    case PromptKind::FNGoldDirect: return resources::kDirectTemplate;
    }
    return {};
}

std::string_view response_trailer(PromptKind kind) {
    switch (kind) {
    case PromptKind::QPCoT: return "**Query Plan**:";
    case PromptKind::UnstructuredCoT: return "A: Let's think step by step.";
    case PromptKind::FNGoldDirect: return kQpMarker;
    }
    return {};
}

std::size_t few_shot_count(PromptKind kind) {
    switch (kind) {
    case PromptKind::QPCoT: return 2;
    case PromptKind::UnstructuredCoT: return 4;
    case PromptKind::FNGoldDirect: return 0;
    }
    return 0;
}

std::size_t estimate_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '_' || c >= 0x80) {
            if (!in_word) ++n;
            in_word = true;
        } else {
            in_word = false;
            if (!std::isspace(c)) ++n;
        }
    }
    return n;
}

RenderedPrompt render_prompt(PromptKind kind, std::string_view schema_text, std::string_view question,
                             std::string_view hint) {
    if (kind != PromptKind::FNGoldDirect && trim(schema_text).empty())
        throw Error("schema text must not be empty for the " + std::string(to_string(kind)) + " prompt");
    check_slot(kind, "schema", schema_text);
    check_slot(kind, "question", question);
    check_slot(kind, "hint", hint);

    std::string hint_section;
    if (!hint.empty()) hint_section = "\n## Hint:\n" + std::string(hint) + "\n";

    RenderedPrompt p;
    p.kind = kind;
    p.text = substitute(template_text(kind), schema_text, question, hint, hint_section);
    p.token_estimate = estimate_tokens(p.text);
    return p;
}

ExtractedOutput extract_output(PromptKind kind, std::string_view response) {
    ExtractedOutput out;

    if (kind == PromptKind::FNGoldDirect) {
        auto sql = sql_from_payload(response);
        if (sql.empty()) return out;
        out.sql = std::move(sql);
        out.note = ExtractionNote::Clean;
        return out;
    }

    std::size_t marker = std::string_view::npos;
    std::size_t marker_len = 0;
    if (kind == PromptKind::QPCoT) {
        marker = response.rfind(kQpMarker);
        marker_len = kQpMarker.size();
    } else {
        marker = find_last_line_initial(response, kCotMarker);
        marker_len = kCotMarker.size();
    }

    if (marker != std::string_view::npos) {
        auto sql = sql_from_payload(response.substr(marker + marker_len));
        if (!sql.empty()) {
            out.reasoning = std::string(trim(response.substr(0, marker)));
            out.sql = std::move(sql);
            out.note = ExtractionNote::Clean;
            return out;
        }
    }

    const auto blocks = fenced_blocks(response);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        auto sql = clean_sql(it->body);
        if (sql.empty()) continue;
        out.reasoning = std::string(trim(response.substr(0, it->open)));
        out.sql = std::move(sql);
        out.note = ExtractionNote::RecoveredFromFence;
        return out;
    }

    out.reasoning = std::string(trim(response));
    out.note = ExtractionNote::NoSqlFound;
    return out;
}

std::string compose_response(PromptKind kind, std::string_view reasoning, std::string_view sql) {
    std::string out;
    switch (kind) {
    case PromptKind::QPCoT:
        if (!reasoning.empty()) {
            out.append(reasoning);
            out.append("\n\n");
        }
        out.append(kQpMarker);
        out.append("\n");
        out.append(sql);
        break;
    case PromptKind::UnstructuredCoT:
        if (!reasoning.empty()) {
            out.append(reasoning);
            out.append("\n");
        }
        out.append(kCotMarker);
        out.append(" ");
        out.append(sql);
        break;
    case PromptKind::FNGoldDirect:
        out.append(sql);
        break;
    }
    return out;
}

}  // namespace structsql
