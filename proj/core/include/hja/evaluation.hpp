#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"
#include "hja/solver.hpp"

namespace hja {

enum class Estimator { hja, ja, btl };

std::string estimator_name(Estimator method);

std::vector<unsigned long> sequential_seeds(int count, unsigned long start = 0);

struct ProtocolConfig {
    double test_fraction = 0.2;
    std::vector<int> noisy_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<int> report_steps = {1, 5, 10};
    int near_tie_max_pairs = 20;
    int near_tie_min_records = 20;
    std::vector<unsigned long> seeds = sequential_seeds(20);
    int cv_folds = 5;
    int threads = 1;
};

/* Fraction of non-tie test records whose observed direction matches the
 * fitted score difference; a zero difference earns half credit.  Records
 * naming labels outside id_map are skipped. */
double holdout_accuracy(const HjaParams& params, const std::vector<ComparisonRecord>& test,
                        const IdMap& id_map);

/* Appends m fair-coin judges labeled noisy_<seed>_<idx>, each with a
 * near-balanced design of (median original per-judge volume) comparisons.
 * Original cells are untouched, and each idx draws from its own stream so
 * the first m' noisy judges coincide for every m >= m'. */
AggregatedCounts inject_noisy_judges(const AggregatedCounts& counts, int m, unsigned long seed);

struct RobustnessRow {
    int step = 0;
    double mean = 0.0;
    double sd = 0.0;
    int n_ok = 0;
};

/* Ranking stability under noise injection: fits a base consensus ranking,
 * then per (report step, seed) refits with that many noisy judges added and
 * scores the fraction of items keeping their base rank position. */
std::vector<RobustnessRow> robustness_study(const std::vector<ComparisonRecord>& records,
                                            Estimator method, const ProtocolConfig& config,
                                            const SolverConfig& solver);

struct NearTiePair {
    int item_i = 0;
    int item_j = 0;
    double win_rate = 0.0;
};

/* Pairs ordered by |pooled train win rate - 0.5| ascending, partitioned into
 * contiguous closest/mid/farthest tertiles. */
struct NearTieSelection {
    std::vector<NearTiePair> pairs;
    std::array<int, 3> tertile_sizes = {0, 0, 0};
};

/* Up to max_pairs unordered item pairs with at least min_records pooled
 * training records, sorted by win-rate distance to one half. */
NearTieSelection select_near_tie_pairs(const AggregatedCounts& train, int min_records,
                                       int max_pairs);

/* Hold-out accuracy restricted to each tertile's pairs; a tertile without
 * effective test records yields an empty slot. */
std::array<std::optional<double>, 3> near_tie_accuracy(const HjaParams& params,
                                                       const NearTieSelection& selection,
                                                       const std::vector<ComparisonRecord>& test,
                                                       const IdMap& id_map);

struct EvalRow {
    std::string method;
    std::string protocol;
    std::string slice;
    double mean = 0.0;
    double sd = 0.0;
    int n_seeds = 0;
};

/* Runs the hold-out, near-tie, and robustness protocols for the structured,
 * sensitivity-only, and pooled estimators over the configured seeds. */
std::vector<EvalRow> run_evaluation(const std::vector<ComparisonRecord>& records,
                                    const ProtocolConfig& config, const SolverConfig& solver);

/* "dataset,method,protocol,slice,mean,sd,n_seeds" lines. */
std::string evaluation_csv(const std::vector<EvalRow>& rows, const std::string& dataset);

}  // namespace hja
