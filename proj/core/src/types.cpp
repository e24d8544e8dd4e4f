#include "structsql/types.hpp"

#include <algorithm>
#include <cctype>

namespace structsql {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::string_view to_string(Difficulty d) {
    switch (d) {
    case Difficulty::Simple: return "Simple";
    case Difficulty::Moderate: return "Moderate";
    case Difficulty::Challenging: return "Challenging";
    }
    return "?";
}

std::string_view to_string(PromptKind k) {
    switch (k) {
    case PromptKind::QPCoT: return "qpcot";
    case PromptKind::UnstructuredCoT: return "cot";
    case PromptKind::FNGoldDirect: return "direct";
    }
    return "?";
}

std::string_view to_string(ComplexityCategory c) {
    switch (c) {
    case ComplexityCategory::SingleTable: return "SingleTable";
    case ComplexityCategory::SubqueryOnly: return "SubqueryOnly";
    case ComplexityCategory::JoinSetOpOnly: return "JoinSetOpOnly";
    case ComplexityCategory::JoinSetOpAndSubquery: return "JoinSetOpAndSubquery";
    }
    return "?";
}

std::string_view to_string(Split s) {
    switch (s) {
    case Split::Train: return "Train";
    case Split::IDVal: return "IDVal";
    case Split::OODVal: return "OODVal";
    }
    return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
    const auto l = lower(s);
    if (l == "simple") return Difficulty::Simple;
    if (l == "moderate") return Difficulty::Moderate;
    if (l == "challenging") return Difficulty::Challenging;
    return std::nullopt;
}

std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
    const auto l = lower(s);
    if (l == "qpcot") return PromptKind::QPCoT;
    if (l == "cot") return PromptKind::UnstructuredCoT;
    if (l == "direct") return PromptKind::FNGoldDirect;
    return std::nullopt;
}

std::optional<ComplexityCategory> parse_category(std::string_view s) {
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
    for (auto sp : {Split::Train, Split::IDVal, Split::OODVal})
        if (to_string(sp) == s) return sp;
    return std::nullopt;
}

}  // namespace structsql
