#include "hja/data.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hja/errors.hpp"

namespace hja {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool valid_outcome(double y) { return y == 0.0 || y == 0.5 || y == 1.0; }

bool parse_outcome(const std::string& tok, double* out) {
    const std::string t = trim(tok);
    if (t.empty()) return false;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return false;
    *out = v;
    return true;
}

/* Composite key for cell lookup; sizes stay far below the packing limits. */
std::int64_t cell_key(int k, int i, int j, int n_items) {
    return (static_cast<std::int64_t>(k) * n_items + i) * n_items + j;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::vector<std::vector<int>> components_of(DisjointSet& ds, int n) {
    std::vector<std::vector<int>> comps;
    std::vector<int> root_slot(n, -1);
    for (int v = 0; v < n; ++v) {
        int r = ds.find(v);
        if (root_slot[r] < 0) {
            root_slot[r] = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        comps[root_slot[r]].push_back(v);
    }
    return comps;
}

}  // namespace

int IdMap::add_judge(const std::string& label) {
    auto it = judge_index.find(label);
    if (it != judge_index.end()) return it->second;
    int idx = num_judges();
    judges.push_back(label);
    judge_index.emplace(label, idx);
    return idx;
}

int IdMap::add_item(const std::string& label) {
    auto it = item_index.find(label);
    if (it != item_index.end()) return it->second;
    int idx = num_items();
    items.push_back(label);
    item_index.emplace(label, idx);
    return idx;
}

int IdMap::find_judge(const std::string& label) const {
    auto it = judge_index.find(label);
    return it == judge_index.end() ? -1 : it->second;
}

int IdMap::find_item(const std::string& label) const {
    auto it = item_index.find(label);
    return it == item_index.end() ? -1 : it->second;
}

ParseResult parse_records(std::istream& source, RecordFormat format) {
    ParseResult out;
    std::string line;
    if (format == RecordFormat::csv) {
        if (!std::getline(source, line)) throw FormatError("empty input, expected a CSV header");
        auto header = split_csv(line);
        for (auto& h : header) h = trim(h);
        const std::vector<std::string> expect = {"judge", "item_a", "item_b", "outcome"};
        if (header != std::vector<std::string>(expect)) {
            throw FormatError("bad CSV header, expected \"judge,item_a,item_b,outcome\"");
        }
        while (std::getline(source, line)) {
            if (trim(line).empty()) continue;
            auto f = split_csv(line);
            if (f.size() != 4) {
                ++out.stats.dropped;
                continue;
            }
            ComparisonRecord rec{trim(f[0]), trim(f[1]), trim(f[2]), 0.0};
            if (rec.judge.empty() || rec.item_a.empty() || rec.item_b.empty() ||
                rec.item_a == rec.item_b || !parse_outcome(f[3], &rec.outcome) ||
                !valid_outcome(rec.outcome)) {
                ++out.stats.dropped;
                continue;
            }
            out.records.push_back(std::move(rec));
        }
    } else {
        while (std::getline(source, line)) {
            if (trim(line).empty()) continue;
            auto doc = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("judge") ||
                !doc.contains("item_a") || !doc.contains("item_b") || !doc.contains("outcome") ||
                !doc["judge"].is_string() || !doc["item_a"].is_string() ||
                !doc["item_b"].is_string() || !doc["outcome"].is_number()) {
                ++out.stats.dropped;
                continue;
            }
            ComparisonRecord rec{doc["judge"].get<std::string>(), doc["item_a"].get<std::string>(),
                                 doc["item_b"].get<std::string>(), doc["outcome"].get<double>()};
            if (rec.judge.empty() || rec.item_a.empty() || rec.item_b.empty() ||
                rec.item_a == rec.item_b || !valid_outcome(rec.outcome)) {
                ++out.stats.dropped;
                continue;
            }
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

ParseResult parse_records_file(const std::string& path, RecordFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_records(in, format);
}

std::string serialize_records(const std::vector<ComparisonRecord>& records, RecordFormat format) {
    std::ostringstream out;
    auto outcome_text = [](double y) -> const char* {
        if (y == 0.0) return "0";
        if (y == 0.5) return "0.5";
        return "1";
    };
    if (format == RecordFormat::csv) {
        out << "judge,item_a,item_b,outcome\n";
        for (const auto& r : records) {
            out << r.judge << ',' << r.item_a << ',' << r.item_b << ',' << outcome_text(r.outcome)
                << '\n';
        }
    } else {
        for (const auto& r : records) {
            nlohmann::json doc{
                {"judge", r.judge}, {"item_a", r.item_a}, {"item_b", r.item_b}, {"outcome", r.outcome}};
            out << doc.dump() << '\n';
        }
    }
    return out.str();
}

namespace {

AggregatedCounts accumulate(const std::vector<ComparisonRecord>& records, IdMap id_map, bool fixed_map,
                            DropStats* stats) {
    AggregatedCounts counts;
    if (!fixed_map) {
        for (const auto& r : records) {
            if (r.item_a == r.item_b) throw ValidationError("record compares item with itself");
            id_map.add_judge(r.judge);
            id_map.add_item(r.item_a);
            id_map.add_item(r.item_b);
        }
    }
    const int n_items = std::max(id_map.num_items(), 1);
    std::unordered_map<std::int64_t, std::pair<double, double>> table;
    for (const auto& r : records) {
        if (r.item_a == r.item_b) throw ValidationError("record compares item with itself");
        if (!valid_outcome(r.outcome)) throw ValidationError("outcome outside {0, 0.5, 1}");
        int k = id_map.find_judge(r.judge);
        int a = id_map.find_item(r.item_a);
        int b = id_map.find_item(r.item_b);
        if (k < 0 || a < 0 || b < 0) {
            if (stats) ++stats->dropped;
            continue;
        }
        int i = std::min(a, b);
        int j = std::max(a, b);
        double win = (a < b) ? r.outcome : 1.0 - r.outcome;
        auto& cell = table[cell_key(k, i, j, n_items)];
        cell.first += 1.0;
        cell.second += win;
    }
    counts.id_map = std::move(id_map);
    counts.cells.reserve(table.size());
    for (const auto& [key, agg] : table) {
        CountCell c;
        c.judge = static_cast<int>(key / (static_cast<std::int64_t>(n_items) * n_items));
        c.item_i = static_cast<int>((key / n_items) % n_items);
        c.item_j = static_cast<int>(key % n_items);
        c.count = agg.first;
        c.wins = agg.second;
        counts.cells.push_back(c);
        counts.n_total += c.count;
    }
    std::sort(counts.cells.begin(), counts.cells.end(), [](const CountCell& a, const CountCell& b) {
        return std::tie(a.judge, a.item_i, a.item_j) < std::tie(b.judge, b.item_i, b.item_j);
    });
    return counts;
}

}  // namespace

AggregatedCounts aggregate(const std::vector<ComparisonRecord>& records) {
    if (records.empty()) throw ValidationError("no records to aggregate");
    return accumulate(records, IdMap{}, /*fixed_map=*/false, nullptr);
}

std::pair<AggregatedCounts, DropStats> aggregate_onto(const std::vector<ComparisonRecord>& records,
                                                      const IdMap& id_map) {
    DropStats stats;
    AggregatedCounts counts = accumulate(records, id_map, /*fixed_map=*/true, &stats);
    return {std::move(counts), stats};
}

bool GraphReport::all_judges_connected() const {
    return std::all_of(per_judge_connected.begin(), per_judge_connected.end(),
                       [](bool c) { return c; });
}

GraphReport check_connectivity(const AggregatedCounts& counts) {
    const int n_judges = counts.num_judges();
    const int n_items = counts.num_items();
    GraphReport report;
    report.per_judge_connected.resize(n_judges);
    report.judge_components.resize(n_judges);

    std::vector<DisjointSet> per_judge(n_judges, DisjointSet(n_items));
    DisjointSet pooled(n_items);
    for (const auto& c : counts.cells) {
        per_judge[c.judge].unite(c.item_i, c.item_j);
        pooled.unite(c.item_i, c.item_j);
    }
    for (int k = 0; k < n_judges; ++k) {
        report.judge_components[k] = components_of(per_judge[k], n_items);
        report.per_judge_connected[k] = report.judge_components[k].size() <= 1;
    }
    report.pooled_components = components_of(pooled, n_items);
    report.pooled_connected = report.pooled_components.size() <= 1;
    return report;
}

std::string describe_components(const GraphReport& report, const IdMap& id_map) {
    auto render = [&](const std::vector<std::vector<int>>& comps) {
        std::string s;
        for (std::size_t c = 0; c < comps.size(); ++c) {
            s += c ? ",{" : "{";
            for (std::size_t t = 0; t < comps[c].size(); ++t) {
                if (t) s += ",";
                s += id_map.items[comps[c][t]];
            }
            s += "}";
        }
        return s;
    };
    std::string msg;
    for (std::size_t k = 0; k < report.per_judge_connected.size(); ++k) {
        if (report.per_judge_connected[k]) continue;
        if (!msg.empty()) msg += "; ";
        msg += "judge " + id_map.judges[k] + ": " + render(report.judge_components[k]);
    }
    if (!report.pooled_connected) {
        if (!msg.empty()) msg += "; ";
        msg += "pooled: " + render(report.pooled_components);
    }
    return msg.empty() ? "all comparison graphs connected" : msg;
}

SplitResult split_records(const std::vector<ComparisonRecord>& records, double test_fraction,
                          unsigned long seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw ValidationError("test_fraction must lie in [0, 1]");
    }
    const std::size_t n = records.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> is_test(n, 0);
    for (std::size_t t = 0; t < n_test; ++t) is_test[order[t]] = 1;
    SplitResult out;
    out.train.reserve(n - n_test);
    out.test.reserve(n_test);
    for (std::size_t idx = 0; idx < n; ++idx) {
        (is_test[idx] ? out.test : out.train).push_back(records[idx]);
    }
    return out;
}

std::string snapshot_json(const AggregatedCounts& counts) {
    nlohmann::json doc;
    doc["judges"] = counts.id_map.judges;
    doc["items"] = counts.id_map.items;
    auto cells = nlohmann::json::array();
    for (const auto& c : counts.cells) {
        cells.push_back({{"k", c.judge}, {"i", c.item_i}, {"j", c.item_j}, {"n", c.count}, {"y", c.wins}});
    }
    doc["cells"] = std::move(cells);
    return doc.dump();
}

}  // namespace hja
