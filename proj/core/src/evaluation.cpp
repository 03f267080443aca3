#include "hja/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hja/errors.hpp"
#include "hja/model_selection.hpp"
#include "hja/rng.hpp"
#include "hja/simulation.hpp"
#include "parallel.hpp"

namespace hja {

std::string estimator_name(Estimator method) {
    switch (method) {
        case Estimator::hja: return "hja";
        case Estimator::ja: return "ja";
        default: return "btl";
    }
}

std::vector<unsigned long> sequential_seeds(int count, unsigned long start) {
    std::vector<unsigned long> seeds(std::max(count, 0));
    std::iota(seeds.begin(), seeds.end(), start);
    return seeds;
}

namespace {

/* Win credit of one test record against the fitted scores; empty when the
 * record is a tie or names unknown labels. */
std::optional<double> record_credit(const Eigen::MatrixXd& scores, const ComparisonRecord& record,
                                    const IdMap& id_map) {
    if (record.outcome == 0.5) return std::nullopt;
    const int k = id_map.find_judge(record.judge);
    const int a = id_map.find_item(record.item_a);
    const int b = id_map.find_item(record.item_b);
    if (k < 0 || a < 0 || b < 0) return std::nullopt;
    const double diff = scores(k, a) - scores(k, b);
    if (diff == 0.0) return 0.5;
    const bool predicted_a = diff > 0.0;
    const bool observed_a = record.outcome == 1.0;
    return predicted_a == observed_a ? 1.0 : 0.0;
}

std::vector<int> rank_positions(const Eigen::VectorXd& mu) {
    std::vector<int> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mu(a) > mu(b); });
    std::vector<int> position(mu.size());
    for (int pos = 0; pos < static_cast<int>(order.size()); ++pos) position[order[pos]] = pos;
    return position;
}

HjaParams fit_estimator(const AggregatedCounts& counts, Estimator method, int rank,
                        const SolverConfig& solver) {
    if (method == Estimator::hja) {
        SolverConfig config = solver;
        config.rank = rank;
        return fit(counts, config).params;
    }
    if (method == Estimator::ja) {
        return fit_baseline(counts, BaselineKind::sensitivity_only, 0, solver);
    }
    return fit_baseline(counts, BaselineKind::pooled, 0, solver);
}

int choose_rank(const std::vector<ComparisonRecord>& records, const AggregatedCounts& counts,
                const ProtocolConfig& config, const SolverConfig& solver, unsigned long seed) {
    const int bound = max_rank(counts.num_judges(), counts.num_items());
    if (bound == 0) return 0;
    try {
        return select_rank(records, RankMethod::cv, bound, config.cv_folds, seed, solver)
            .chosen_rank;
    } catch (const std::runtime_error&) {
        return 1;
    }
}

struct Aggregate {
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;
};

Aggregate mean_sd(const std::vector<double>& values) {
    Aggregate out;
    out.n = static_cast<int>(values.size());
    if (out.n == 0) return out;
    for (double v : values) out.mean += v;
    out.mean /= out.n;
    if (out.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / (out.n - 1));
    }
    return out;
}

}  // namespace

double holdout_accuracy(const HjaParams& params, const std::vector<ComparisonRecord>& test,
                        const IdMap& id_map) {
    const Eigen::MatrixXd scores = compose(params).s;
    double credit = 0.0;
    long effective = 0;
    for (const auto& record : test) {
        const auto c = record_credit(scores, record, id_map);
        if (!c) continue;
        credit += *c;
        ++effective;
    }
    if (effective == 0) throw ValidationError("no scoreable non-tie test records");
    return credit / static_cast<double>(effective);
}

AggregatedCounts inject_noisy_judges(const AggregatedCounts& counts, int m, unsigned long seed) {
    if (m < 0) throw ValidationError("noisy judge count must be nonnegative");
    AggregatedCounts out = counts;
    if (m == 0) return out;
    if (counts.num_judges() < 1 || counts.num_items() < 2) {
        throw ValidationError("need at least 1 judge and 2 items");
    }

    std::vector<double> volumes(counts.num_judges(), 0.0);
    for (const auto& cell : counts.cells) volumes[cell.judge] += cell.count;
    std::sort(volumes.begin(), volumes.end());
    const int mid = counts.num_judges() / 2;
    const double median = counts.num_judges() % 2 == 1
                              ? volumes[mid]
                              : 0.5 * (volumes[mid - 1] + volumes[mid]);
    const long volume = std::max(1l, std::lround(median));

    for (int idx = 0; idx < m; ++idx) {
        const int judge = out.id_map.add_judge("noisy_" + std::to_string(seed) + "_" +
                                               std::to_string(idx));
        const auto allocation =
            allocate_comparisons(1, counts.num_items(), volume, derive_seed(seed, idx, 11));
        std::mt19937_64 rng(derive_seed(seed, idx, 12));
        for (const auto& cell : allocation) {
            const long n = std::lround(cell.count);
            if (n <= 0) continue;
            std::binomial_distribution<long> binom(n, 0.5);
            const double wins = static_cast<double>(binom(rng));
            out.cells.push_back({judge, cell.item_i, cell.item_j, static_cast<double>(n), wins});
            out.n_total += static_cast<double>(n);
        }
    }
    return out;
}

std::vector<RobustnessRow> robustness_study(const std::vector<ComparisonRecord>& records,
                                            Estimator method, const ProtocolConfig& config,
                                            const SolverConfig& solver) {
    if (records.empty()) throw ValidationError("no records");
    if (config.seeds.empty()) throw ValidationError("no seeds configured");
    if (config.report_steps.empty()) throw ValidationError("no report steps configured");

    const AggregatedCounts counts = aggregate(records);
    const int rank = method == Estimator::hja
                         ? choose_rank(records, counts, config, solver,
                                       derive_seed(config.seeds.front(), 31))
                         : 0;
    const HjaParams base = fit_estimator(counts, method, rank, solver);
    const std::vector<int> base_positions = rank_positions(base.mu);
    const int n_items = counts.num_items();

    const int n_steps = static_cast<int>(config.report_steps.size());
    const int n_seeds = static_cast<int>(config.seeds.size());
    std::vector<std::optional<double>> cells(static_cast<std::size_t>(n_steps) * n_seeds);
    detail::parallel_for(n_steps * n_seeds, config.threads, [&](int task) {
        const int step_at = task / n_seeds;
        const int seed_at = task % n_seeds;
        try {
            const AggregatedCounts noisy =
                inject_noisy_judges(counts, config.report_steps[step_at], config.seeds[seed_at]);
            const HjaParams refit = fit_estimator(noisy, method, rank, solver);
            const std::vector<int> positions = rank_positions(refit.mu);
            int kept = 0;
            for (int i = 0; i < n_items; ++i) {
                if (positions[i] == base_positions[i]) ++kept;
            }
            cells[task] = static_cast<double>(kept) / n_items;
        } catch (const std::runtime_error&) {
        }
    });

    std::vector<RobustnessRow> rows;
    rows.reserve(n_steps);
    for (int step_at = 0; step_at < n_steps; ++step_at) {
        std::vector<double> values;
        for (int seed_at = 0; seed_at < n_seeds; ++seed_at) {
            const auto& cell = cells[step_at * n_seeds + seed_at];
            if (cell) values.push_back(*cell);
        }
        const Aggregate agg = mean_sd(values);
        rows.push_back({config.report_steps[step_at], agg.mean, agg.sd, agg.n});
    }
    return rows;
}

NearTieSelection select_near_tie_pairs(const AggregatedCounts& train, int min_records,
                                       int max_pairs) {
    if (min_records < 1) throw ValidationError("min_records must be positive");
    if (max_pairs < 3) throw ValidationError("max_pairs must be at least 3");

    std::map<std::pair<int, int>, std::pair<double, double>> pooled;
    for (const auto& cell : train.cells) {
        auto& entry = pooled[{cell.item_i, cell.item_j}];
        entry.first += cell.count;
        entry.second += cell.wins;
    }

    NearTieSelection selection;
    for (const auto& [key, tally] : pooled) {
        if (tally.first < static_cast<double>(min_records)) continue;
        selection.pairs.push_back({key.first, key.second, tally.second / tally.first});
    }
    std::sort(selection.pairs.begin(), selection.pairs.end(),
              [](const NearTiePair& a, const NearTiePair& b) {
                  const double da = std::abs(a.win_rate - 0.5);
                  const double db = std::abs(b.win_rate - 0.5);
                  if (da != db) return da < db;
                  if (a.item_i != b.item_i) return a.item_i < b.item_i;
                  return a.item_j < b.item_j;
              });
    if (static_cast<int>(selection.pairs.size()) > max_pairs) {
        selection.pairs.resize(max_pairs);
    }
    const int n_pairs = static_cast<int>(selection.pairs.size());
    if (n_pairs < 3) {
        throw InsufficientNearTiePairs("only " + std::to_string(n_pairs) +
                                       " item pairs have enough training records");
    }
    const int base = n_pairs / 3;
    const int rem = n_pairs % 3;
    for (int t = 0; t < 3; ++t) selection.tertile_sizes[t] = base + (t < rem ? 1 : 0);
    return selection;
}

std::array<std::optional<double>, 3> near_tie_accuracy(const HjaParams& params,
                                                       const NearTieSelection& selection,
                                                       const std::vector<ComparisonRecord>& test,
                                                       const IdMap& id_map) {
    std::map<std::pair<int, int>, int> tertile_of;
    int at = 0;
    for (int t = 0; t < 3; ++t) {
        for (int c = 0; c < selection.tertile_sizes[t]; ++c, ++at) {
            const NearTiePair& pair = selection.pairs[at];
            tertile_of[{pair.item_i, pair.item_j}] = t;
        }
    }

    const Eigen::MatrixXd scores = compose(params).s;
    std::array<double, 3> credit = {0.0, 0.0, 0.0};
    std::array<long, 3> effective = {0, 0, 0};
    for (const auto& record : test) {
        const int a = id_map.find_item(record.item_a);
        const int b = id_map.find_item(record.item_b);
        if (a < 0 || b < 0) continue;
        const auto it = tertile_of.find({std::min(a, b), std::max(a, b)});
        if (it == tertile_of.end()) continue;
        const auto c = record_credit(scores, record, id_map);
        if (!c) continue;
        credit[it->second] += *c;
        ++effective[it->second];
    }

    std::array<std::optional<double>, 3> out;
    for (int t = 0; t < 3; ++t) {
        if (effective[t] > 0) out[t] = credit[t] / static_cast<double>(effective[t]);
    }
    return out;
}

std::vector<EvalRow> run_evaluation(const std::vector<ComparisonRecord>& records,
                                    const ProtocolConfig& config, const SolverConfig& solver) {
    if (records.empty()) throw ValidationError("no records");
    if (config.seeds.empty()) throw ValidationError("no seeds configured");
    if (config.test_fraction <= 0.0 || config.test_fraction >= 1.0) {
        throw ValidationError("test_fraction must lie strictly between 0 and 1");
    }

    constexpr std::array<Estimator, 3> kMethods = {Estimator::hja, Estimator::ja, Estimator::btl};
    constexpr std::array<const char*, 3> kTertiles = {"closest", "mid", "farthest"};

    struct SeedOutcome {
        std::array<std::optional<double>, 3> holdout;
        std::array<std::array<std::optional<double>, 3>, 3> tie;
    };
    const int n_seeds = static_cast<int>(config.seeds.size());
    std::vector<SeedOutcome> outcomes(n_seeds);

    detail::parallel_for(n_seeds, config.threads, [&](int s) {
        SeedOutcome& slot = outcomes[s];
        try {
            const SplitResult split = split_records(records, config.test_fraction, config.seeds[s]);
            const AggregatedCounts train = aggregate(split.train);
            std::optional<NearTieSelection> selection;
            try {
                selection = select_near_tie_pairs(train, config.near_tie_min_records,
                                                  config.near_tie_max_pairs);
            } catch (const std::runtime_error&) {
            }
            for (int m = 0; m < 3; ++m) {
                try {
                    const int rank = kMethods[m] == Estimator::hja
                                         ? choose_rank(split.train, train, config, solver,
                                                       derive_seed(config.seeds[s], 41))
                                         : 0;
                    const HjaParams params = fit_estimator(train, kMethods[m], rank, solver);
                    try {
                        slot.holdout[m] = holdout_accuracy(params, split.test, train.id_map);
                    } catch (const std::runtime_error&) {
                    }
                    if (selection) {
                        slot.tie[m] =
                            near_tie_accuracy(params, *selection, split.test, train.id_map);
                    }
                } catch (const std::runtime_error&) {
                }
            }
        } catch (const std::runtime_error&) {
        }
    });

    std::vector<EvalRow> rows;
    for (int m = 0; m < 3; ++m) {
        const std::string name = estimator_name(kMethods[m]);

        std::vector<double> holdout_values;
        for (const auto& slot : outcomes) {
            if (slot.holdout[m]) holdout_values.push_back(*slot.holdout[m]);
        }
        const Aggregate holdout = mean_sd(holdout_values);
        rows.push_back({name, "holdout", "all", holdout.mean, holdout.sd, holdout.n});

        for (int t = 0; t < 3; ++t) {
            std::vector<double> values;
            for (const auto& slot : outcomes) {
                if (slot.tie[m][t]) values.push_back(*slot.tie[m][t]);
            }
            const Aggregate agg = mean_sd(values);
            rows.push_back({name, "near_tie", kTertiles[t], agg.mean, agg.sd, agg.n});
        }

        for (const auto& step : robustness_study(records, kMethods[m], config, solver)) {
            rows.push_back({name, "robustness", "m=" + std::to_string(step.step), step.mean,
                            step.sd, step.n_ok});
        }
    }
    return rows;
}

std::string evaluation_csv(const std::vector<EvalRow>& rows, const std::string& dataset) {
    std::ostringstream out;
    out << "dataset,method,protocol,slice,mean,sd,n_seeds\n";
    out << std::setprecision(12);
    for (const auto& row : rows) {
        out << dataset << ',' << row.method << ',' << row.protocol << ',' << row.slice << ','
            << row.mean << ',' << row.sd << ',' << row.n_seeds << '\n';
    }
    return out.str();
}

}  // namespace hja
