#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "structsql/executor.hpp"
#include "structsql/promptforge.hpp"
#include "structsql/sqlstruct.hpp"
#include "structsql/taxonomy.hpp"

using namespace structsql;

namespace {

const char* const kQueries[] = {
    "SELECT title FROM film WHERE rental_rate > 2.99 ORDER BY title LIMIT 10",
    "SELECT T2.name FROM film_category AS T1 INNER JOIN category AS T2 ON T1.category_id = T2.category_id "
    "GROUP BY T2.name ORDER BY COUNT(T1.film_id) DESC LIMIT 1",
    "SELECT name FROM customer WHERE id IN (SELECT customer_id FROM orders WHERE total > (SELECT AVG(total) FROM "
    "orders))",
    "WITH t AS (SELECT a, b FROM x UNION SELECT a, b FROM y) SELECT CAST(SUM(CASE WHEN a = 1 THEN 1 ELSE 0 END) AS "
    "REAL) * 100 / COUNT(*) FROM t JOIN z ON t.b = z.b WHERE EXISTS (SELECT 1 FROM w WHERE w.a = t.a)",
};

void BM_ProfileSql(benchmark::State& state) {
    const char* sql = kQueries[state.range(0)];
    for (auto _ : state) {
        const auto p = profile_sql(sql);
        benchmark::DoNotOptimize(classify_complexity(p));
    }
}
BENCHMARK(BM_ProfileSql)->DenseRange(0, 3);

ExecOutcome random_rows(std::mt19937_64& rng, std::size_t n, std::size_t cols) {
    ExecOutcome out;
    out.columns = cols;
    for (std::size_t i = 0; i < n; ++i) {
        Row r;
        for (std::size_t c = 0; c < cols; ++c) {
            switch (rng() % 3) {
            case 0: r.emplace_back(static_cast<std::int64_t>(rng() % 1000)); break;
            case 1: r.emplace_back(static_cast<double>(rng() % 1000) / 8.0); break;
            default: r.emplace_back("v" + std::to_string(rng() % 1000)); break;
            }
        }
        out.rows.push_back(std::move(r));
    }
    return out;
}

void BM_CompareResults(benchmark::State& state) {
    std::mt19937_64 rng(11);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto gold = random_rows(rng, n, 4);
    auto pred = gold;
    std::shuffle(pred.rows.begin(), pred.rows.end(), rng);
    for (auto _ : state) benchmark::DoNotOptimize(compare_results(pred, gold).verdict);
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CompareResults)->RangeMultiplier(10)->Range(10, 100000);

void BM_ExtractOutput(benchmark::State& state) {
    std::string reasoning;
    for (int i = 0; i < state.range(0); ++i)
        reasoning += "**Query Plan**:\n1. Scan table film and keep rows where rental_rate exceeds 2.99.\n";
    const auto response = compose_response(PromptKind::QPCoT, reasoning, kQueries[1]);
    for (auto _ : state) benchmark::DoNotOptimize(extract_output(PromptKind::QPCoT, response));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(response.size()));
}
BENCHMARK(BM_ExtractOutput)->Arg(1)->Arg(20)->Arg(200);

void BM_ClassifyDiagnostic(benchmark::State& state) {
    const std::string msgs[] = {"near \"SELEC\": syntax error", "no such column: T1.titl",
                                "near \"WHERE\": syntax error", "misuse of aggregate: SUM()"};
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(classify_diagnostic(msgs[i++ % 4]));
}
BENCHMARK(BM_ClassifyDiagnostic);

}  // namespace

BENCHMARK_MAIN();
