#include <cctype>
#include <string>

#include "structsql/sql_ast.hpp"

namespace structsql::sql {

namespace {

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

std::string to_upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();

    auto push = [&](TokenKind kind, std::string text, std::size_t at) {
        Token t;
        t.kind = kind;
        if (kind == TokenKind::Word) t.upper = to_upper(text);
        t.text = std::move(text);
        t.offset = at;
        out.push_back(std::move(t));
    };

    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            const auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? n : end + 2;
            continue;
        }
        const std::size_t start = i;

        if ((c == 'x' || c == 'X') && i + 1 < n && sql[i + 1] == '\'') {
            const auto end = sql.find('\'', i + 2);
            if (end == std::string_view::npos) throw ParseError("unterminated blob literal", start);
            push(TokenKind::Blob, std::string(sql.substr(i, end + 1 - i)), start);
            i = end + 1;
            continue;
        }
        if (ident_start(c)) {
            while (i < n && ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            push(TokenKind::Word, std::string(sql.substr(start, i - start)), start);
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            const char q = static_cast<char>(c);
            std::string text;
            ++i;
            bool closed = false;
            while (i < n) {
                if (sql[i] == q) {
                    if (i + 1 < n && sql[i + 1] == q) {
                        text.push_back(q);
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                text.push_back(sql[i++]);
            }
            if (!closed) throw ParseError("unterminated quoted token", start);
            push(q == '\'' ? TokenKind::String : TokenKind::QuotedIdent, std::move(text), start);
            continue;
        }
        if (c == '[') {
            const auto end = sql.find(']', i + 1);
            if (end == std::string_view::npos) throw ParseError("unterminated [identifier]", start);
            push(TokenKind::QuotedIdent, std::string(sql.substr(i + 1, end - i - 1)), start);
            i = end + 1;
            continue;
        }
        if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
                i += 2;
                while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
            } else {
                while (i < n && (std::isdigit(static_cast<unsigned char>(sql[i])) || sql[i] == '_')) ++i;
                if (i < n && sql[i] == '.') {
                    ++i;
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                }
                if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                    std::size_t j = i + 1;
                    if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
                    if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
                        i = j;
                        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                    }
                }
            }
            if (i < n && ident_start(static_cast<unsigned char>(sql[i])))
                throw ParseError("unrecognized token: \"" + std::string(sql.substr(start, i + 1 - start)) + "\"", start);
            push(TokenKind::Number, std::string(sql.substr(start, i - start)), start);
            continue;
        }
        if (c == '?') {
            ++i;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            push(TokenKind::Parameter, std::string(sql.substr(start, i - start)), start);
            continue;
        }
        if ((c == ':' || c == '@' || c == '$') && i + 1 < n && ident_char(static_cast<unsigned char>(sql[i + 1]))) {
            ++i;
            while (i < n && ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            push(TokenKind::Parameter, std::string(sql.substr(start, i - start)), start);
            continue;
        }

        static constexpr std::string_view three[] = {"->>"};
        static constexpr std::string_view two[] = {"||", "<<", ">>", "<=", ">=", "==", "!=", "<>", "->"};
        auto match = [&](std::string_view op) { return sql.substr(i, op.size()) == op; };
        bool done = false;
        for (auto op : three)
            if (!done && match(op)) {
                push(TokenKind::Operator, std::string(op), start);
                i += op.size();
                done = true;
            }
        for (auto op : two)
            if (!done && match(op)) {
                push(TokenKind::Operator, std::string(op), start);
                i += op.size();
                done = true;
            }
        if (done) continue;
        if (std::string_view("()*,.;+-/%<>=&|~").find(static_cast<char>(c)) != std::string_view::npos) {
            push(TokenKind::Operator, std::string(1, static_cast<char>(c)), start);
            ++i;
            continue;
        }
        throw ParseError("unrecognized token: \"" + std::string(1, static_cast<char>(c)) + "\"", start);
    }
    Token end;
    end.kind = TokenKind::End;
    end.offset = n;
    out.push_back(std::move(end));
    return out;
}

}  // namespace structsql::sql
