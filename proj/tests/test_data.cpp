#include <random>
#include <sstream>

#include "doctest.h"
#include "hja/data.hpp"
#include "hja/errors.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace hja;

TEST_SUITE_BEGIN("data");

TEST_CASE("csv rows map directly onto records") {
    std::istringstream source("judge,item_a,item_b,outcome\nj1,a,b,1\nj1,a,b,0.5\nj2,b,c,0\n");
    const auto result = parse_records(source, RecordFormat::csv);
    REQUIRE(result.records.size() == 3);
    CHECK(result.stats.dropped == 0);
    CHECK(result.records[0].judge == "j1");
    CHECK(result.records[0].item_a == "a");
    CHECK(result.records[0].item_b == "b");
    CHECK(result.records[0].outcome == 1.0);
    CHECK(result.records[1].outcome == 0.5);
    CHECK(result.records[2].outcome == 0.0);
}

TEST_CASE("csv requires the exact header") {
    std::istringstream source("judge,left,right,outcome\nj1,a,b,1\n");
    CHECK_THROWS_AS(parse_records(source, RecordFormat::csv), FormatError);
}

TEST_CASE("invalid rows are dropped and counted, never coerced") {
    std::istringstream source(
        "judge,item_a,item_b,outcome\n"
        "j1,a,b,unknown\n"
        "j1,a,b,0.7\n"
        "j1,a,a,1\n"
        "j1,a,b,1\n");
    const auto result = parse_records(source, RecordFormat::csv);
    CHECK(result.records.size() == 1);
    CHECK(result.stats.dropped == 3);
}

TEST_CASE("jsonl parses one object per line and drops malformed lines") {
    std::istringstream source(
        "{\"judge\":\"j1\",\"item_a\":\"a\",\"item_b\":\"b\",\"outcome\":1}\n"
        "not json\n"
        "{\"judge\":\"j1\",\"item_a\":\"b\",\"item_b\":\"c\",\"outcome\":0.5}\n");
    const auto result = parse_records(source, RecordFormat::jsonl);
    REQUIRE(result.records.size() == 2);
    CHECK(result.stats.dropped == 1);
    CHECK(result.records[1].outcome == 0.5);
}

TEST_CASE("serialize then parse is the identity on valid records") {
    const std::vector<ComparisonRecord> records{
        {"j1", "a", "b", 1.0}, {"j2", "b", "c", 0.5}, {"j1", "c", "a", 0.0}};
    for (const auto format : {RecordFormat::csv, RecordFormat::jsonl}) {
        std::istringstream source(serialize_records(records, format));
        const auto result = parse_records(source, format);
        REQUIRE(result.records.size() == records.size());
        CHECK(result.stats.dropped == 0);
        for (std::size_t idx = 0; idx < records.size(); ++idx) {
            CHECK(result.records[idx].judge == records[idx].judge);
            CHECK(result.records[idx].item_a == records[idx].item_a);
            CHECK(result.records[idx].item_b == records[idx].item_b);
            CHECK(result.records[idx].outcome == records[idx].outcome);
        }
    }
}

TEST_CASE("aggregate counts wins for the canonical orientation") {
    const std::vector<ComparisonRecord> records{
        {"j1", "a", "b", 1.0}, {"j1", "a", "b", 0.0}, {"j1", "b", "a", 1.0}, {"j1", "a", "c", 0.5}};
    const auto counts = aggregate(records);
    REQUIRE(counts.cells.size() == 2);
    CHECK(counts.n_total == 4.0);
    /* a vs b: two direct records plus the flipped one crediting b. */
    CHECK(counts.cells[0].item_i == 0);
    CHECK(counts.cells[0].item_j == 1);
    CHECK(counts.cells[0].count == 3.0);
    CHECK(counts.cells[0].wins == 1.0);
    CHECK(counts.cells[1].count == 1.0);
    CHECK(counts.cells[1].wins == 0.5);
}

TEST_CASE("aggregate is invariant under orientation flips") {
    std::mt19937_64 rng(7);
    std::vector<ComparisonRecord> records;
    std::uniform_int_distribution<int> judge_dist(0, 2), item_dist(0, 4);
    std::uniform_int_distribution<int> outcome_dist(0, 2);
    for (int t = 0; t < 200; ++t) {
        int a = item_dist(rng), b = item_dist(rng);
        if (a == b) continue;
        records.push_back({"j" + std::to_string(judge_dist(rng)), "i" + std::to_string(a),
                           "i" + std::to_string(b), outcome_dist(rng) / 2.0});
    }
    auto flipped = records;
    std::bernoulli_distribution coin(0.5);
    for (auto& record : flipped)
        if (coin(rng)) {
            std::swap(record.item_a, record.item_b);
            record.outcome = 1.0 - record.outcome;
        }
    /* Same label universe in the same first-appearance order. */
    const auto base = aggregate(records);
    const auto [other, stats] = aggregate_onto(flipped, base.id_map);
    CHECK(stats.dropped == 0);
    REQUIRE(other.cells.size() == base.cells.size());
    for (std::size_t c = 0; c < base.cells.size(); ++c) {
        CHECK(other.cells[c].judge == base.cells[c].judge);
        CHECK(other.cells[c].item_i == base.cells[c].item_i);
        CHECK(other.cells[c].item_j == base.cells[c].item_j);
        CHECK(other.cells[c].count == doctest::Approx(base.cells[c].count));
        CHECK(other.cells[c].wins == doctest::Approx(base.cells[c].wins));
    }
}

TEST_CASE("aggregate rejects self comparisons") {
    CHECK_THROWS_AS(aggregate({{"j1", "a", "a", 1.0}}), ValidationError);
}

TEST_CASE("aggregate_onto skips records with labels outside the universe") {
    const auto base = aggregate({{"j1", "a", "b", 1.0}});
    const auto [counts, stats] =
        aggregate_onto({{"j1", "a", "b", 0.0}, {"j9", "a", "b", 1.0}, {"j1", "a", "z", 1.0}}, base.id_map);
    CHECK(counts.n_total == 1.0);
    CHECK(stats.dropped == 2);
}

TEST_CASE("connectivity follows the per-judge edge sets") {
    const auto connected = aggregate({{"j1", "i1", "i2", 1.0}, {"j1", "i2", "i3", 0.0}});
    const auto report = check_connectivity(connected);
    CHECK(report.per_judge_connected[0]);
    CHECK(report.pooled_connected);

    const auto split = aggregate({{"j1", "i1", "i2", 1.0}, {"j1", "i3", "i4", 0.0}});
    const auto split_report = check_connectivity(split);
    CHECK_FALSE(split_report.per_judge_connected[0]);
    CHECK_FALSE(split_report.pooled_connected);
    REQUIRE(split_report.judge_components[0].size() == 2);
    CHECK(split_report.judge_components[0][0] == std::vector<int>{0, 1});
    CHECK(split_report.judge_components[0][1] == std::vector<int>{2, 3});
    CHECK(describe_components(split_report, split.id_map).find("i3") != std::string::npos);
}

TEST_CASE("pooled graph can be connected while a judge graph is not") {
    const auto counts = aggregate({{"j1", "i1", "i2", 1.0},
                                   {"j1", "i3", "i4", 0.0},
                                   {"j2", "i2", "i3", 1.0}});
    const auto report = check_connectivity(counts);
    CHECK_FALSE(report.per_judge_connected[0]);
    CHECK(report.per_judge_connected[1]);
    CHECK(report.pooled_connected);
    CHECK_FALSE(report.all_judges_connected());
}

TEST_CASE("complete designs are connected for every judge") {
    std::mt19937_64 rng(3);
    const auto counts = testsupport::random_counts(3, 5, rng);
    const auto report = check_connectivity(counts);
    CHECK(report.all_judges_connected());
    CHECK(report.pooled_connected);
}

TEST_CASE("split sizes follow the rounded test fraction") {
    std::vector<ComparisonRecord> records;
    for (int t = 0; t < 10; ++t) records.push_back({"j", "a" + std::to_string(t), "b", 1.0});
    const auto split = split_records(records, 0.2, 5);
    CHECK(split.train.size() == 8);
    CHECK(split.test.size() == 2);

    const auto all_train = split_records(records, 0.0, 5);
    CHECK(all_train.train.size() == 10);
    CHECK(all_train.test.empty());

    CHECK_THROWS_AS(split_records(records, 1.0, 5), ValidationError);
}

TEST_CASE("splitting is deterministic and keeps input order within parts") {
    std::vector<ComparisonRecord> records;
    for (int t = 0; t < 25; ++t)
        records.push_back({"j", "a" + std::to_string(t), "b" + std::to_string(t), 1.0});
    const auto first = split_records(records, 0.4, 11);
    const auto second = split_records(records, 0.4, 11);
    REQUIRE(first.train.size() == second.train.size());
    for (std::size_t idx = 0; idx < first.train.size(); ++idx)
        CHECK(first.train[idx].item_a == second.train[idx].item_a);
    /* Input order survives inside each part. */
    for (std::size_t idx = 1; idx < first.train.size(); ++idx) {
        const int prev = std::stoi(first.train[idx - 1].item_a.substr(1));
        const int here = std::stoi(first.train[idx].item_a.substr(1));
        CHECK(prev < here);
    }
    const auto other = split_records(records, 0.4, 12);
    bool differs = false;
    for (std::size_t idx = 0; idx < std::min(first.test.size(), other.test.size()); ++idx)
        differs = differs || first.test[idx].item_a != other.test[idx].item_a;
    CHECK(differs);
}

TEST_CASE("snapshot json carries the full design") {
    const auto counts = aggregate({{"j1", "a", "b", 1.0}, {"j2", "a", "b", 0.5}});
    const auto parsed = nlohmann::json::parse(snapshot_json(counts));
    CHECK(parsed["judges"].size() == 2);
    CHECK(parsed["items"].size() == 2);
    REQUIRE(parsed["cells"].size() == 2);
    CHECK(parsed["cells"][0]["n"] == 1.0);
    CHECK(parsed["cells"][1]["y"] == 0.5);
}

TEST_SUITE_END();
