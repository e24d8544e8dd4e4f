#include "structsql/sqlstruct.hpp"

namespace structsql {

namespace {

class ProfileWalker {
public:
    ConstructProfile profile;

    void statement(const sql::SelectStmt& stmt, bool nested) {
        if (nested) profile.has_subquery = true;
        for (const auto& cte : stmt.ctes) statement(*cte.body, true);
        if (stmt.cores.size() > 1) profile.has_set_op = true;
        for (const auto& core : stmt.cores) select_core(core);
        if (!stmt.order_by.empty()) profile.has_order_by = true;
        for (const auto& term : stmt.order_by) expr(term.expr);
        if (stmt.limit) expr(*stmt.limit);
        if (stmt.offset) expr(*stmt.offset);
    }

private:
    void select_core(const sql::SelectCore& core) {
        for (const auto& row : core.values)
            for (const auto& e : row) expr(e);
        for (const auto& col : core.columns)
            if (col.expr) expr(*col.expr);
        if (core.from) from_list(*core.from);
        if (core.where) expr(*core.where);
        if (!core.group_by.empty()) profile.has_group_by = true;
        for (const auto& e : core.group_by) expr(e);
        if (core.having) expr(*core.having);
    }

    void from_list(const sql::FromList& list) {
        if (list.items.size() > 1) profile.has_join = true;
        for (const auto& item : list.items) {
            switch (item.kind) {
            case sql::FromItem::Kind::Table:
                ++profile.table_count;
                break;
            case sql::FromItem::Kind::TableFunction:
                ++profile.table_count;
                for (const auto& a : item.args) expr(a);
                break;
            case sql::FromItem::Kind::Subquery:
                ++profile.table_count;
                statement(*item.subquery, true);
                break;
            case sql::FromItem::Kind::Nested:
                from_list(*item.nested);
                break;
            }
            if (item.on) expr(*item.on);
        }
    }

    void expr(const sql::Expr& e) {
        if (e.kind == sql::ExprKind::Function &&
            is_aggregate_call(e.text, e.children.size(), e.star_arg))
            profile.has_aggregate = true;
        for (const auto& c : e.children) expr(c);
        if (e.subquery) statement(*e.subquery, true);
        if (e.filter) expr(*e.filter);
        if (e.over) {
            for (const auto& p : e.over->partition_by) expr(p);
            for (const auto& o : e.over->order_by) expr(o.expr);
        }
    }
};

}  // namespace

bool is_aggregate_call(std::string_view name, std::size_t arg_count, bool star_arg) {
    if (name == "count") return star_arg || arg_count <= 1;
    if (name == "sum" || name == "avg" || name == "total" || name == "group_concat" ||
        name == "string_agg")
        return true;
    if (name == "min" || name == "max") return arg_count == 1;
    return false;
}

ConstructProfile profile_statement(const sql::SelectStmt& stmt) {
    ProfileWalker w;
    w.statement(stmt, false);
    return w.profile;
}

ConstructProfile profile_sql(std::string_view text) {
    return profile_statement(sql::parse_select(text));
}

ComplexityCategory classify_complexity(const ConstructProfile& p) {
    const bool structural = p.has_join || p.has_set_op;
    if (structural && p.has_subquery) return ComplexityCategory::JoinSetOpAndSubquery;
    if (structural) return ComplexityCategory::JoinSetOpOnly;
    if (p.has_subquery) return ComplexityCategory::SubqueryOnly;
    return ComplexityCategory::SingleTable;
}

std::string describe(const ConstructProfile& p) {
    std::string out = "{";
    auto flag = [&](const char* name, bool v) {
        out += name;
        out += v ? "=1 " : "=0 ";
    };
    flag("join", p.has_join);
    flag("set_op", p.has_set_op);
    flag("subquery", p.has_subquery);
    flag("group_by", p.has_group_by);
    flag("order_by", p.has_order_by);
    flag("aggregate", p.has_aggregate);
    out += "tables=" + std::to_string(p.table_count) + "}";
    return out;
}

}  // namespace structsql
