#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <utility>

#include "structsql/sql_ast.hpp"

namespace structsql::sql {

namespace {

// Words that are never accepted as bare identifiers or implicit aliases.
// Everything else (VIRTUAL, REPLACE, DATE, ...) may name a column, matching
// SQLite's fallback-identifier behaviour closely enough for real corpora.
constexpr std::array kReserved = {
    "ALL",    "AND",     "AS",     "ASC",       "BETWEEN", "BY",      "CASE",  "CAST",   "COLLATE",
    "CROSS",  "DESC",    "DISTINCT", "ELSE",    "END",     "ESCAPE",  "EXCEPT", "EXISTS", "FROM",
    "FULL",   "GLOB",    "GROUP",  "HAVING",    "IN",      "INDEXED", "INNER", "INTERSECT", "IS",
    "ISNULL", "JOIN",    "LEFT",   "LIKE",      "LIMIT",   "MATCH",   "NATURAL", "NOT",  "NOTNULL",
    "NULL",   "OFFSET",  "ON",     "OR",        "ORDER",   "OUTER",   "REGEXP", "RIGHT", "SELECT",
    "THEN",   "UNION",   "USING",  "VALUES",    "WHEN",    "WHERE",   "WINDOW", "WITH",
};

bool is_reserved(const Token& t) {
    return t.kind == TokenKind::Word &&
           std::find(kReserved.begin(), kReserved.end(), std::string_view(t.upper)) != kReserved.end();
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

enum Bp : int {
    kOr = 1,
    kAnd = 2,
    kNot = 3,
    kEquality = 4,
    kRelational = 5,
    kBitwise = 6,
    kAdditive = 7,
    kMultiplicative = 8,
    kConcat = 9,
    kCollate = 10,
    kUnary = 11,
};

class Parser {
public:
    explicit Parser(std::string_view sql) : toks_(tokenize(sql)) {}

    SelectStmt parse_statement() {
        auto stmt = parse_select_stmt();
        while (peek().is_op(";")) advance();
        if (peek().kind != TokenKind::End) fail_near();
        return stmt;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        const auto i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    const Token& advance() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool accept_word(std::string_view kw) {
        if (peek().is_word(kw)) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_op(std::string_view op) {
        if (peek().is_op(op)) {
            advance();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail_near() const {
        const Token& t = peek();
        if (t.kind == TokenKind::End) throw ParseError("incomplete input", t.offset);
        std::string shown = t.text;
        if (t.kind == TokenKind::String) shown = "'" + shown + "'";
        throw ParseError("near \"" + shown + "\": syntax error", t.offset);
    }
    void expect_word(std::string_view kw) {
        if (!accept_word(kw)) fail_near();
    }
    void expect_op(std::string_view op) {
        if (!accept_op(op)) fail_near();
    }

    bool at_select_start(std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.is_word("SELECT") || t.is_word("WITH") || t.is_word("VALUES");
    }

    bool at_identifier() const {
        const Token& t = peek();
        return t.kind == TokenKind::QuotedIdent || (t.kind == TokenKind::Word && !is_reserved(t));
    }
    std::string parse_identifier() {
        if (!at_identifier()) fail_near();
        return advance().text;
    }

    std::string parse_optional_alias() {
        if (accept_word("AS")) {
            const Token& t = peek();
            if (t.kind == TokenKind::String || t.kind == TokenKind::QuotedIdent || t.kind == TokenKind::Word)
                return advance().text;
            fail_near();
        }
        const Token& t = peek();
        if (t.kind == TokenKind::QuotedIdent || t.kind == TokenKind::String) return advance().text;
        if (t.kind == TokenKind::Word && !is_reserved(t)) return advance().text;
        return {};
    }

    // ---- statements ----------------------------------------------------

    SelectStmt parse_select_stmt() {
        SelectStmt stmt;
        if (accept_word("WITH")) {
            stmt.recursive = accept_word("RECURSIVE");
            do {
                CommonTableExpr cte;
                cte.name = parse_identifier();
                if (accept_op("(")) {
                    do cte.columns.push_back(parse_identifier());
                    while (accept_op(","));
                    expect_op(")");
                }
                expect_word("AS");
                if (accept_word("NOT")) expect_word("MATERIALIZED");
                else accept_word("MATERIALIZED");
                expect_op("(");
                cte.body = std::make_unique<SelectStmt>(parse_select_stmt());
                expect_op(")");
                stmt.ctes.push_back(std::move(cte));
            } while (accept_op(","));
        }
        stmt.cores.push_back(parse_core());
        for (;;) {
            if (accept_word("UNION")) {
                stmt.ops.push_back(accept_word("ALL") ? CompoundOp::UnionAll : CompoundOp::Union);
            } else if (accept_word("INTERSECT")) {
                stmt.ops.push_back(CompoundOp::Intersect);
            } else if (accept_word("EXCEPT")) {
                stmt.ops.push_back(CompoundOp::Except);
            } else {
                break;
            }
            stmt.cores.push_back(parse_core());
        }
        if (accept_word("ORDER")) {
            expect_word("BY");
            stmt.order_by = parse_order_terms();
        }
        if (accept_word("LIMIT")) {
            stmt.limit = parse_expr(kOr);
            if (accept_word("OFFSET")) {
                stmt.offset = parse_expr(kOr);
            } else if (accept_op(",")) {
                // LIMIT <offset>, <count>
                stmt.offset = std::move(stmt.limit);
                stmt.limit = parse_expr(kOr);
            }
        }
        return stmt;
    }

    std::vector<OrderTerm> parse_order_terms() {
        std::vector<OrderTerm> out;
        do {
            OrderTerm term;
            term.expr = parse_expr(kOr);
            if (accept_word("DESC")) term.descending = true;
            else accept_word("ASC");
            if (accept_word("NULLS")) {
                if (!accept_word("FIRST")) expect_word("LAST");
            }
            out.push_back(std::move(term));
        } while (accept_op(","));
        return out;
    }

    SelectCore parse_core() {
        SelectCore core;
        if (accept_word("VALUES")) {
            core.is_values = true;
            do {
                expect_op("(");
                core.values.push_back(parse_expr_list());
                expect_op(")");
            } while (accept_op(","));
            return core;
        }
        expect_word("SELECT");
        if (accept_word("DISTINCT")) core.distinct = true;
        else accept_word("ALL");

        do core.columns.push_back(parse_result_column());
        while (accept_op(","));

        if (accept_word("FROM")) core.from = parse_from_list();
        if (accept_word("WHERE")) core.where = parse_expr(kOr);
        if (accept_word("GROUP")) {
            expect_word("BY");
            core.group_by = parse_expr_list();
        }
        if (accept_word("HAVING")) core.having = parse_expr(kOr);
        if (accept_word("WINDOW")) {
            do {
                parse_identifier();
                expect_word("AS");
                parse_window_body();
            } while (accept_op(","));
        }
        return core;
    }

    ResultColumn parse_result_column() {
        ResultColumn col;
        if (accept_op("*")) {
            col.kind = ResultColumn::Kind::Star;
            return col;
        }
        const Token& t = peek();
        if ((t.kind == TokenKind::Word || t.kind == TokenKind::QuotedIdent) && peek(1).is_op(".") &&
            peek(2).is_op("*")) {
            col.kind = ResultColumn::Kind::TableStar;
            col.table = advance().text;
            advance();
            advance();
            return col;
        }
        col.kind = ResultColumn::Kind::Expr;
        col.expr = parse_expr(kOr);
        col.alias = parse_optional_alias();
        return col;
    }

    FromList parse_from_list() {
        FromList list;
        list.items.push_back(parse_from_item());
        for (;;) {
            JoinClause join;
            if (accept_op(",")) {
                join.kind = JoinKind::Comma;
            } else {
                const std::size_t save = pos_;
                join.natural = accept_word("NATURAL");
                if (accept_word("LEFT")) {
                    accept_word("OUTER");
                    join.kind = JoinKind::Left;
                } else if (accept_word("RIGHT")) {
                    accept_word("OUTER");
                    join.kind = JoinKind::Right;
                } else if (accept_word("FULL")) {
                    accept_word("OUTER");
                    join.kind = JoinKind::Full;
                } else if (accept_word("INNER")) {
                    join.kind = JoinKind::Inner;
                } else if (accept_word("CROSS")) {
                    join.kind = JoinKind::Cross;
                }
                if (!accept_word("JOIN")) {
                    if (pos_ != save) fail_near();
                    break;
                }
            }
            list.joins.push_back(join);
            FromItem item = parse_from_item();
            if (accept_word("ON")) {
                item.on = parse_expr(kOr);
            } else if (accept_word("USING")) {
                expect_op("(");
                do item.using_columns.push_back(parse_identifier());
                while (accept_op(","));
                expect_op(")");
            }
            list.items.push_back(std::move(item));
        }
        return list;
    }

    FromItem parse_from_item() {
        FromItem item;
        if (accept_op("(")) {
            if (at_select_start()) {
                item.kind = FromItem::Kind::Subquery;
                item.subquery = std::make_unique<SelectStmt>(parse_select_stmt());
            } else {
                item.kind = FromItem::Kind::Nested;
                item.nested = std::make_unique<FromList>(parse_from_list());
            }
            expect_op(")");
            item.alias = parse_optional_alias();
            return item;
        }
        item.name = parse_identifier();
        if (accept_op(".")) {
            item.schema = std::move(item.name);
            item.name = parse_identifier();
        }
        if (accept_op("(")) {
            item.kind = FromItem::Kind::TableFunction;
            if (!peek().is_op(")")) item.args = parse_expr_list();
            expect_op(")");
        }
        item.alias = parse_optional_alias();
        if (accept_word("INDEXED")) {
            expect_word("BY");
            parse_identifier();
        } else if (peek().is_word("NOT") && peek(1).is_word("INDEXED")) {
            advance();
            advance();
        }
        return item;
    }

    // ---- expressions ---------------------------------------------------

    std::vector<Expr> parse_expr_list() {
        std::vector<Expr> out;
        do out.push_back(parse_expr(kOr));
        while (accept_op(","));
        return out;
    }

    static Expr make(ExprKind kind, std::string text) {
        Expr e;
        e.kind = kind;
        e.text = std::move(text);
        return e;
    }
    static Expr binary(std::string op, Expr lhs, Expr rhs) {
        Expr e = make(ExprKind::Binary, std::move(op));
        e.children.push_back(std::move(lhs));
        e.children.push_back(std::move(rhs));
        return e;
    }

    static int infix_bp(const Token& t, const Token& next) {
        if (t.kind == TokenKind::Word) {
            const auto& u = t.upper;
            if (u == "OR") return kOr;
            if (u == "AND") return kAnd;
            if (u == "IS" || u == "IN" || u == "LIKE" || u == "GLOB" || u == "MATCH" || u == "REGEXP" ||
                u == "BETWEEN" || u == "ISNULL" || u == "NOTNULL")
                return kEquality;
            if (u == "NOT" && (next.is_word("IN") || next.is_word("LIKE") || next.is_word("GLOB") ||
                               next.is_word("MATCH") || next.is_word("REGEXP") || next.is_word("BETWEEN") ||
                               next.is_word("NULL")))
                return kEquality;
            if (u == "COLLATE") return kCollate;
            return -1;
        }
        if (t.kind != TokenKind::Operator) return -1;
        const auto& o = t.text;
        if (o == "=" || o == "==" || o == "!=" || o == "<>") return kEquality;
        if (o == "<" || o == "<=" || o == ">" || o == ">=") return kRelational;
        if (o == "&" || o == "|" || o == "<<" || o == ">>") return kBitwise;
        if (o == "+" || o == "-") return kAdditive;
        if (o == "*" || o == "/" || o == "%") return kMultiplicative;
        if (o == "||" || o == "->" || o == "->>") return kConcat;
        return -1;
    }

    Expr parse_expr(int min_bp) {
        Expr lhs = parse_unary();
        for (;;) {
            const int bp = infix_bp(peek(), peek(1));
            if (bp < 0 || bp < min_bp) break;
            lhs = parse_infix(std::move(lhs), bp);
        }
        return lhs;
    }

    Expr parse_infix(Expr lhs, int bp) {
        const Token op = advance();
        if (op.kind == TokenKind::Operator) return binary(op.text, std::move(lhs), parse_expr(bp + 1));

        const auto& u = op.upper;
        if (u == "OR" || u == "AND") return binary(u, std::move(lhs), parse_expr(bp + 1));
        if (u == "COLLATE") {
            Expr e = make(ExprKind::Collate, parse_identifier());
            e.children.push_back(std::move(lhs));
            return e;
        }
        if (u == "ISNULL" || u == "NOTNULL") {
            Expr e = make(ExprKind::IsNull, u);
            e.negated = (u == "NOTNULL");
            e.children.push_back(std::move(lhs));
            return e;
        }
        if (u == "IS") {
            bool neg = accept_word("NOT");
            if (accept_word("DISTINCT")) {
                expect_word("FROM");
                neg = !neg;
            }
            return binary(neg ? "IS NOT" : "IS", std::move(lhs), parse_expr(bp + 1));
        }
        bool negated = false;
        std::string word = u;
        if (u == "NOT") {
            negated = true;
            word = advance().upper;
        }
        if (word == "NULL") {
            Expr e = make(ExprKind::IsNull, "NOT NULL");
            e.negated = true;
            e.children.push_back(std::move(lhs));
            return e;
        }
        if (word == "IN") return parse_in_rhs(std::move(lhs), negated);
        if (word == "BETWEEN") {
            Expr e = make(ExprKind::Between, "BETWEEN");
            e.negated = negated;
            e.children.push_back(std::move(lhs));
            e.children.push_back(parse_expr(kEquality + 1));
            expect_word("AND");
            e.children.push_back(parse_expr(kEquality + 1));
            return e;
        }
        // LIKE / GLOB / MATCH / REGEXP
        Expr e = make(ExprKind::Like, word);
        e.negated = negated;
        e.children.push_back(std::move(lhs));
        e.children.push_back(parse_expr(kEquality + 1));
        if (accept_word("ESCAPE")) e.children.push_back(parse_expr(kEquality + 1));
        return e;
    }

    Expr parse_in_rhs(Expr lhs, bool negated) {
        if (accept_op("(")) {
            if (at_select_start()) {
                Expr e = make(ExprKind::InSubquery, "IN");
                e.negated = negated;
                e.children.push_back(std::move(lhs));
                e.subquery = std::make_unique<SelectStmt>(parse_select_stmt());
                expect_op(")");
                return e;
            }
            Expr e = make(ExprKind::InList, "IN");
            e.negated = negated;
            e.children.push_back(std::move(lhs));
            if (!peek().is_op(")")) {
                for (auto& item : parse_expr_list()) e.children.push_back(std::move(item));
            }
            expect_op(")");
            return e;
        }
        Expr e = make(ExprKind::InTable, parse_identifier());
        if (accept_op(".")) e.text += "." + parse_identifier();
        if (accept_op("(")) {
            // table-valued function as IN operand
            if (!peek().is_op(")")) parse_expr_list();
            expect_op(")");
        }
        e.negated = negated;
        e.children.push_back(std::move(lhs));
        return e;
    }

    Expr parse_unary() {
        const Token& t = peek();
        if (t.is_op("-") || t.is_op("+") || t.is_op("~")) {
            Expr e = make(ExprKind::Unary, advance().text);
            e.children.push_back(parse_expr(kUnary));
            return e;
        }
        if (t.is_word("NOT")) {
            advance();
            if (peek().is_word("EXISTS")) {
                Expr e = parse_primary();
                e.negated = true;
                return e;
            }
            Expr e = make(ExprKind::Unary, "NOT");
            e.children.push_back(parse_expr(kNot));
            return e;
        }
        return parse_primary();
    }

    std::string parse_type_name() {
        std::string type;
        while (peek().kind == TokenKind::Word || peek().kind == TokenKind::QuotedIdent) {
            if (!type.empty()) type += ' ';
            type += advance().text;
        }
        if (type.empty()) fail_near();
        if (accept_op("(")) {
            type += '(';
            int depth = 1;
            while (depth > 0) {
                if (peek().kind == TokenKind::End) fail_near();
                const Token& x = advance();
                if (x.is_op("(")) ++depth;
                if (x.is_op(")")) --depth;
                if (depth > 0) type += x.text;
            }
            type += ')';
        }
        return type;
    }

    void parse_window_body(WindowSpec* spec = nullptr) {
        WindowSpec local;
        WindowSpec& w = spec ? *spec : local;
        expect_op("(");
        if (peek().kind == TokenKind::Word && !is_reserved(peek()) && !peek().is_word("PARTITION") &&
            !peek().is_word("RANGE") && !peek().is_word("ROWS") && !peek().is_word("GROUPS"))
            w.base_name = advance().text;
        if (accept_word("PARTITION")) {
            expect_word("BY");
            w.partition_by = parse_expr_list();
        }
        if (accept_word("ORDER")) {
            expect_word("BY");
            w.order_by = parse_order_terms();
        }
        if (peek().is_word("RANGE") || peek().is_word("ROWS") || peek().is_word("GROUPS")) {
            // Frame specifications carry no nested queries; skip to the closing paren.
            int depth = 0;
            while (!(depth == 0 && peek().is_op(")"))) {
                if (peek().kind == TokenKind::End) fail_near();
                if (peek().is_op("(")) ++depth;
                if (peek().is_op(")")) --depth;
                advance();
            }
        }
        expect_op(")");
    }

    Expr parse_function(std::string name) {
        Expr e = make(ExprKind::Function, lower(std::move(name)));
        expect_op("(");
        if (accept_op("*")) {
            e.star_arg = true;
        } else if (!peek().is_op(")")) {
            if (accept_word("DISTINCT")) e.distinct_args = true;
            else accept_word("ALL");
            e.children = parse_expr_list();
            if (accept_word("ORDER")) {
                expect_word("BY");
                parse_order_terms();
            }
        }
        expect_op(")");
        if (peek().is_word("FILTER") && peek(1).is_op("(")) {
            advance();
            advance();
            expect_word("WHERE");
            e.filter = std::make_unique<Expr>(parse_expr(kOr));
            expect_op(")");
        }
        if (peek().is_word("OVER")) {
            advance();
            e.over = std::make_unique<WindowSpec>();
            if (peek().is_op("(")) parse_window_body(e.over.get());
            else e.over->base_name = parse_identifier();
        }
        return e;
    }

    Expr parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::Number:
        case TokenKind::String:
        case TokenKind::Blob:
            return make(ExprKind::Literal, advance().text);
        case TokenKind::Parameter:
            return make(ExprKind::Parameter, advance().text);
        case TokenKind::End:
            fail_near();
        default:
            break;
        }

        if (t.is_op("(")) {
            advance();
            if (at_select_start()) {
                Expr e = make(ExprKind::Subquery, "");
                e.subquery = std::make_unique<SelectStmt>(parse_select_stmt());
                expect_op(")");
                return e;
            }
            auto items = parse_expr_list();
            expect_op(")");
            if (items.size() == 1) return std::move(items.front());
            Expr e = make(ExprKind::Row, "");
            e.children = std::move(items);
            return e;
        }
        if (t.kind == TokenKind::Operator) fail_near();

        if (t.kind == TokenKind::Word) {
            const auto& u = t.upper;
            if (u == "NULL" || u == "CURRENT_TIME" || u == "CURRENT_DATE" || u == "CURRENT_TIMESTAMP")
                return make(ExprKind::Literal, advance().upper);
            if (u == "CAST") {
                advance();
                expect_op("(");
                Expr inner = parse_expr(kOr);
                expect_word("AS");
                Expr e = make(ExprKind::Cast, parse_type_name());
                expect_op(")");
                e.children.push_back(std::move(inner));
                return e;
            }
            if (u == "CASE") return parse_case();
            if (u == "EXISTS") {
                advance();
                expect_op("(");
                Expr e = make(ExprKind::Exists, "EXISTS");
                e.subquery = std::make_unique<SelectStmt>(parse_select_stmt());
                expect_op(")");
                return e;
            }
            if (u == "RAISE" && peek(1).is_op("(")) {
                advance();
                advance();
                int depth = 1;
                while (depth > 0) {
                    if (peek().kind == TokenKind::End) fail_near();
                    if (peek().is_op("(")) ++depth;
                    if (peek().is_op(")")) --depth;
                    advance();
                }
                return make(ExprKind::Raise, "RAISE");
            }
            if (peek(1).is_op("(") && !is_reserved(t)) return parse_function(advance().text);
            if (is_reserved(t)) fail_near();
        }

        // column reference: [schema.][table.]column
        Expr e = make(ExprKind::Column, parse_identifier());
        while (peek().is_op(".")) {
            advance();
            const Token& part = peek();
            if (part.kind != TokenKind::Word && part.kind != TokenKind::QuotedIdent) fail_near();
            e.text += "." + advance().text;
        }
        return e;
    }

    Expr parse_case() {
        expect_word("CASE");
        Expr e = make(ExprKind::Case, "CASE");
        if (!peek().is_word("WHEN")) {
            e.case_has_operand = true;
            e.children.push_back(parse_expr(kOr));
        }
        if (!peek().is_word("WHEN")) fail_near();
        while (accept_word("WHEN")) {
            e.children.push_back(parse_expr(kOr));
            expect_word("THEN");
            e.children.push_back(parse_expr(kOr));
        }
        if (accept_word("ELSE")) {
            e.case_has_else = true;
            e.children.push_back(parse_expr(kOr));
        }
        expect_word("END");
        return e;
    }
};

}  // namespace

SelectStmt parse_select(std::string_view sql) {
    Parser p(sql);
    return p.parse_statement();
}

}  // namespace structsql::sql
