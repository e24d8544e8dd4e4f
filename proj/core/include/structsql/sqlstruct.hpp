#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "structsql/sql_ast.hpp"
#include "structsql/types.hpp"

namespace structsql {

/// Which SQL constructs appear anywhere in a query's parse tree, nested
/// queries included.
struct ConstructProfile {
    bool has_join = false;      // any FROM clause with two or more sources (comma joins included)
    bool has_set_op = false;    // UNION / INTERSECT / EXCEPT at any depth
    bool has_subquery = false;  // any nested SELECT: scalar, IN, EXISTS, derived table, CTE
    bool has_group_by = false;
    bool has_order_by = false;  // statement-level ORDER BY; window ORDER BY does not count
    bool has_aggregate = false;
    std::size_t table_count = 0;  // FROM-clause sources summed over every SELECT in the tree

    bool operator==(const ConstructProfile&) const = default;
};

// Aggregate function names recognised by the profiler. min/max only count
// in their single-argument form (the multi-argument forms are scalar).
bool is_aggregate_call(std::string_view lowercase_name, std::size_t arg_count, bool star_arg);

ConstructProfile profile_statement(const sql::SelectStmt& stmt);

/// Parses `sql` and profiles it. Throws sql::ParseError carrying the parser
/// diagnostic when the text is not a single SELECT statement.
ConstructProfile profile_sql(std::string_view sql);

ComplexityCategory classify_complexity(const ConstructProfile& profile);

std::string describe(const ConstructProfile& profile);

}  // namespace structsql
