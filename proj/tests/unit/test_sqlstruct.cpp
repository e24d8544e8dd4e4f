#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "structsql/sqlstruct.hpp"

using namespace structsql;
using structsql::testing::scan_category;
using structsql::testing::scan_profile;

namespace {

ComplexityCategory category_of(const std::string& sql) { return classify_complexity(profile_sql(sql)); }

}  // namespace

TEST(Profile, SingleTableAggregate) {
    const auto p = profile_sql("SELECT COUNT(*) FROM film WHERE rating = 'PG'");
    EXPECT_FALSE(p.has_join);
    EXPECT_FALSE(p.has_subquery);
    EXPECT_TRUE(p.has_aggregate);
    EXPECT_EQ(p.table_count, 1u);
    EXPECT_EQ(classify_complexity(p), ComplexityCategory::SingleTable);
}

TEST(Profile, CategoriesForCanonicalShapes) {
    EXPECT_EQ(category_of("SELECT a FROM t"), ComplexityCategory::SingleTable);
    EXPECT_EQ(category_of("SELECT a FROM t WHERE b = (SELECT MAX(b) FROM t)"), ComplexityCategory::SubqueryOnly);
    EXPECT_EQ(category_of("SELECT a FROM t JOIN u ON t.id = u.id"), ComplexityCategory::JoinSetOpOnly);
    EXPECT_EQ(category_of("SELECT a FROM t UNION SELECT b FROM u"), ComplexityCategory::JoinSetOpOnly);
    EXPECT_EQ(category_of("SELECT a FROM t, u WHERE t.x IN (SELECT y FROM v)"),
              ComplexityCategory::JoinSetOpAndSubquery);
    EXPECT_EQ(category_of("SELECT a FROM t WHERE EXISTS (SELECT 1 FROM u)"), ComplexityCategory::SubqueryOnly);
    EXPECT_EQ(category_of("WITH c AS (SELECT 1) SELECT * FROM c"), ComplexityCategory::SubqueryOnly);
    EXPECT_EQ(category_of("SELECT a FROM (SELECT a FROM t)"), ComplexityCategory::SubqueryOnly);
}

TEST(Profile, CommaJoinCountsAsJoin) {
    const auto p = profile_sql("SELECT T1.a FROM t AS T1, u AS T2 WHERE T1.id = T2.id");
    EXPECT_TRUE(p.has_join);
    EXPECT_EQ(p.table_count, 2u);
}

TEST(Profile, NestedJoinCountsLeaves) {
    const auto p = profile_sql("SELECT * FROM a JOIN (b JOIN c ON b.x = c.x) ON a.y = b.y");
    EXPECT_TRUE(p.has_join);
    EXPECT_EQ(p.table_count, 3u);
}

TEST(Profile, TableCountSumsAcrossNesting) {
    const auto p = profile_sql("SELECT * FROM a WHERE a.x IN (SELECT x FROM b JOIN c USING (k)) UNION SELECT * FROM d");
    EXPECT_EQ(p.table_count, 4u);
    EXPECT_TRUE(p.has_set_op);
    EXPECT_TRUE(p.has_subquery);
}

TEST(Profile, WindowOrderIsNotStatementOrder) {
    EXPECT_FALSE(profile_sql("SELECT rank() OVER (ORDER BY a) FROM t").has_order_by);
    EXPECT_FALSE(profile_sql("SELECT sum(a) OVER w FROM t WINDOW w AS (ORDER BY b)").has_order_by);
    EXPECT_TRUE(profile_sql("SELECT a FROM t ORDER BY a").has_order_by);
    EXPECT_TRUE(profile_sql("SELECT a FROM t WHERE a IN (SELECT a FROM u ORDER BY a LIMIT 1)").has_order_by);
}

TEST(Profile, MinMaxArity) {
    EXPECT_TRUE(profile_sql("SELECT max(a) FROM t").has_aggregate);
    EXPECT_FALSE(profile_sql("SELECT max(a, b) FROM t").has_aggregate);
    EXPECT_FALSE(profile_sql("SELECT min(a, 0) FROM t").has_aggregate);
    EXPECT_TRUE(profile_sql("SELECT total(a), group_concat(b) FROM t").has_aggregate);
    EXPECT_FALSE(profile_sql("SELECT upper(a) FROM t").has_aggregate);
    EXPECT_TRUE(is_aggregate_call("count", 0, true));
    EXPECT_FALSE(is_aggregate_call("max", 2, false));
}

TEST(Profile, GroupByAndValues) {
    EXPECT_TRUE(profile_sql("SELECT a, count(*) FROM t GROUP BY a").has_group_by);
    const auto v = profile_sql("VALUES (1), (2)");
    EXPECT_EQ(v.table_count, 0u);
    EXPECT_EQ(classify_complexity(v), ComplexityCategory::SingleTable);
}

TEST(Profile, RejectsNonSelect) {
    EXPECT_THROW(profile_sql("DELETE FROM t"), sql::ParseError);
    EXPECT_THROW(profile_sql("SELECT FROM"), sql::ParseError);
}

TEST(Profile, DescribeListsFlags) {
    const auto d = describe(profile_sql("SELECT a FROM t JOIN u ON 1 GROUP BY a ORDER BY a"));
    EXPECT_NE(d.find("join"), std::string::npos);
    EXPECT_NE(d.find("group"), std::string::npos);
}

TEST(ProfileOracle, AgreesOnHandWrittenCorpus) {
    for (const auto& sql : structsql::testing::load_sql_lines(STRUCTSQL_TEST_FIXTURES "/sql_corpus.sql")) {
        const auto expected = scan_profile(sql);
        const auto got = profile_sql(sql);
        EXPECT_EQ(got, expected) << sql << "\n got: " << describe(got) << "\n oracle: " << describe(expected);
    }
}

TEST(ProfileOracle, AgreesOnGeneratedQueriesAndGeneratorTruth) {
    std::mt19937_64 rng(20240611);
    for (int i = 0; i < 500; ++i) {
        const auto q = structsql::testing::random_query(rng);
        const auto got = profile_sql(q.sql);
        EXPECT_EQ(got, scan_profile(q.sql)) << q.sql;
        EXPECT_EQ(got, q.truth) << q.sql << "\n got: " << describe(got) << "\n truth: " << describe(q.truth);
        EXPECT_EQ(classify_complexity(got), scan_category(q.truth)) << q.sql;
    }
}

TEST(ProfileOracle, SyntheticCorpusLandsInIntendedCategories) {
    structsql::testing::TempDir dir;
    const auto corpus = structsql::testing::make_synthetic_corpus(dir.path(), 1, 8);
    for (const auto& t : corpus.tasks)
        EXPECT_EQ(std::string(to_string(category_of(t.gold_sql))), t.category) << t.gold_sql;
}
