#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace structsql::sql {

enum class TokenKind {
    Word,          // bare identifier or keyword
    QuotedIdent,   // "x", `x`, [x]
    String,        // 'x'
    Number,
    Blob,          // X'..'
    Parameter,     // ?, ?1, :a, @a, $a
    Operator,      // punctuation and operators
    End,
};

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;   // source text (quotes removed for String/QuotedIdent)
    std::string upper;  // uppercased text for Word tokens
    std::size_t offset = 0;

    bool is_word(std::string_view kw) const { return kind == TokenKind::Word && upper == kw; }
    bool is_op(std::string_view op) const { return kind == TokenKind::Operator && text == op; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

std::vector<Token> tokenize(std::string_view sql);

struct SelectStmt;
struct Expr;
struct OrderTerm;

enum class ExprKind {
    Literal,      // numbers, strings, blobs, NULL, CURRENT_*
    Column,       // [schema.][table.]column
    Parameter,
    Unary,        // op in text; one child
    Binary,       // op in text; two children
    Between,      // children: value, low, high
    InList,       // children: value, items...
    InSubquery,   // children: value; subquery
    InTable,      // children: value; text = table name
    Like,         // op in text (LIKE/GLOB/REGEXP/MATCH); children: value, pattern[, escape]
    IsNull,       // children: value; negated => NOT NULL
    Function,     // text = lowercase name; children = args
    Cast,         // text = type; one child
    Case,         // children: [operand] (when then)* [else]; flags describe layout
    Exists,       // subquery
    Subquery,     // scalar subquery
    Collate,      // text = collation; one child
    Row,          // parenthesized vector (a, b)
    Raise,
};

struct WindowSpec {
    std::string base_name;
    std::vector<Expr> partition_by;
    std::vector<OrderTerm> order_by;
};

struct Expr {
    ExprKind kind = ExprKind::Literal;
    std::string text;
    std::vector<Expr> children;
    std::unique_ptr<SelectStmt> subquery;

    // Function calls
    bool distinct_args = false;
    bool star_arg = false;
    std::unique_ptr<Expr> filter;
    std::unique_ptr<WindowSpec> over;

    // Case
    bool case_has_operand = false;
    bool case_has_else = false;

    bool negated = false;  // NOT IN / NOT LIKE / NOT BETWEEN / NOT NULL / NOT EXISTS
};

struct OrderTerm {
    Expr expr;
    bool descending = false;
};

struct ResultColumn {
    enum class Kind { Star, TableStar, Expr } kind = Kind::Expr;
    std::string table;  // for TableStar
    std::optional<Expr> expr;
    std::string alias;
};

struct FromItem;

enum class JoinKind { Comma, Inner, Left, Right, Full, Cross };

struct JoinClause {
    JoinKind kind = JoinKind::Inner;
    bool natural = false;
};

struct FromList {
    std::vector<FromItem> items;
    std::vector<JoinClause> joins;  // joins[i] connects items[i] and items[i + 1]
};

struct FromItem {
    enum class Kind { Table, TableFunction, Subquery, Nested } kind = Kind::Table;
    std::string schema;
    std::string name;
    std::string alias;
    std::vector<Expr> args;                // TableFunction
    std::unique_ptr<SelectStmt> subquery;  // Subquery
    std::unique_ptr<FromList> nested;      // Nested
    std::optional<Expr> on;                // constraint joining this item to its left
    std::vector<std::string> using_columns;
};

struct SelectCore {
    bool distinct = false;
    bool is_values = false;
    std::vector<ResultColumn> columns;
    std::vector<std::vector<Expr>> values;
    std::optional<FromList> from;
    std::optional<Expr> where;
    std::vector<Expr> group_by;
    std::optional<Expr> having;
};

enum class CompoundOp { Union, UnionAll, Intersect, Except };

struct CommonTableExpr {
    std::string name;
    std::vector<std::string> columns;
    std::unique_ptr<SelectStmt> body;
};

struct SelectStmt {
    bool recursive = false;
    std::vector<CommonTableExpr> ctes;
    std::vector<SelectCore> cores;
    std::vector<CompoundOp> ops;  // ops[i] joins cores[i] and cores[i + 1]
    std::vector<OrderTerm> order_by;
    std::optional<Expr> limit;
    std::optional<Expr> offset;
};

// Parses exactly one SELECT statement (optionally prefixed by WITH and
// followed by a single ';'). Throws ParseError on anything else.
SelectStmt parse_select(std::string_view sql);

}  // namespace structsql::sql
