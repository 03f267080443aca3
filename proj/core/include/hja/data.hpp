#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hja {

/* One pairwise comparison: judge saw item_a vs item_b, outcome is the share
 * of the win credited to item_a (1 win, 0 loss, 0.5 tie). */
struct ComparisonRecord {
    std::string judge;
    std::string item_a;
    std::string item_b;
    double outcome = 0.0;
};

enum class RecordFormat { csv, jsonl };

/* Stable label <-> index assignment, in order of first appearance. */
struct IdMap {
    std::vector<std::string> judges;
    std::vector<std::string> items;
    std::unordered_map<std::string, int> judge_index;
    std::unordered_map<std::string, int> item_index;

    int add_judge(const std::string& label);
    int add_item(const std::string& label);
    /* -1 when the label is unknown. */
    int find_judge(const std::string& label) const;
    int find_item(const std::string& label) const;
    int num_judges() const { return static_cast<int>(judges.size()); }
    int num_items() const { return static_cast<int>(items.size()); }
};

/* Aggregated cell for judge k and item pair (i, j) with i < j.  count is the
 * number of comparisons, wins the total win share credited to item i. */
struct CountCell {
    int judge = 0;
    int item_i = 0;
    int item_j = 0;
    double count = 0.0;
    double wins = 0.0;

    double win_rate() const { return wins / count; }
};

/* Observed design: cells sorted by (judge, item_i, item_j), unique keys,
 * count > 0 for every cell. */
struct AggregatedCounts {
    IdMap id_map;
    std::vector<CountCell> cells;
    double n_total = 0.0;

    int num_judges() const { return id_map.num_judges(); }
    int num_items() const { return id_map.num_items(); }
};

struct DropStats {
    std::size_t dropped = 0;
};

struct ParseResult {
    std::vector<ComparisonRecord> records;
    DropStats stats;
};

/* Reads comparison records from a stream.  CSV requires the exact header
 * "judge,item_a,item_b,outcome"; JSONL wants one object per line with those
 * keys.  Rows that fail to parse, carry an outcome outside {0, 0.5, 1}, or
 * compare an item with itself are dropped and counted, never coerced. */
ParseResult parse_records(std::istream& source, RecordFormat format);
ParseResult parse_records_file(const std::string& path, RecordFormat format);

/* Inverse of parse_records on valid records. */
std::string serialize_records(const std::vector<ComparisonRecord>& records, RecordFormat format);

/* Builds counts with labels indexed by first appearance.  Orientation is
 * canonicalized to item_i < item_j, flipping the win share as needed. */
AggregatedCounts aggregate(const std::vector<ComparisonRecord>& records);

/* Same aggregation against a fixed label universe; records mentioning labels
 * absent from id_map are skipped and counted in DropStats. */
std::pair<AggregatedCounts, DropStats> aggregate_onto(const std::vector<ComparisonRecord>& records,
                                                      const IdMap& id_map);

/* Item components of each judge's comparison graph and of the pooled graph.
 * Components are sorted lists of item indices, ordered by smallest member;
 * items a judge never compared appear as singletons. */
struct GraphReport {
    std::vector<bool> per_judge_connected;
    bool pooled_connected = false;
    std::vector<std::vector<std::vector<int>>> judge_components;
    std::vector<std::vector<int>> pooled_components;

    bool all_judges_connected() const;
};

GraphReport check_connectivity(const AggregatedCounts& counts);

/* Human-readable component listing for error messages, e.g. for a
 * ConnectivityError naming the disconnected pieces. */
std::string describe_components(const GraphReport& report, const IdMap& id_map);

/* Uniform record-level partition with exactly round(test_fraction * n) test
 * records; deterministic in seed, original order kept within each part. */
struct SplitResult {
    std::vector<ComparisonRecord> train;
    std::vector<ComparisonRecord> test;
};

SplitResult split_records(const std::vector<ComparisonRecord>& records, double test_fraction,
                          unsigned long seed);

/* JSON snapshot {"judges": [...], "items": [...], "cells": [{k,i,j,n,y}]}. */
std::string snapshot_json(const AggregatedCounts& counts);

}  // namespace hja
