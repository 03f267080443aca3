#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"
#include "hja/inference.hpp"
#include "hja/solver.hpp"

namespace hja {

struct TruthSpec {
    int n_judges = 4;
    int n_items = 8;
    int rank = 1;
    /* Heterogeneity scale multiplying both residual factors; 0 collapses to
     * a pure sensitivity model. */
    double het_scale = 1.0;
};

/* Random ground truth: centered standard-normal consensus, Dirichlet-based
 * sensitivities summing to K, and factor pairs built from column-centered
 * Gaussian draws orthonormalized away from the consensus direction, with
 * planted strengths (r, r-1, ..., 1). */
HjaParams generate_truth(const TruthSpec& spec, unsigned long seed);

/* Near-balanced design over all K * N(N-1)/2 cells: every count is
 * floor(n_cmp/C) or one more, the remainder cells drawn uniformly without
 * replacement.  Cells arrive sorted; zero-count cells are kept. */
std::vector<CountCell> allocate_comparisons(int n_judges, int n_items, long n_cmp,
                                            unsigned long seed);

/* Binomial outcomes at the truth's win probabilities.  Labels are
 * "judge_<k>" and "item_<i>"; zero-count cells are dropped. */
AggregatedCounts sample_outcomes(const HjaParams& truth, const std::vector<CountCell>& allocation,
                                 unsigned long seed);

/* Rank correlation of two score vectors using average ranks on ties. */
double spearman_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/* Graded ranking agreement at depth N with exponential relevance
 * 2^(N - true rank) - 1 and log2(position + 1) discounts. */
double ndcg_at_n(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

struct MetricReport {
    double mse = 0.0;
    double spearman = 0.0;
    double ndcg = 0.0;
    /* Fraction of score entries whose interval covers the truth; absent
     * when no intervals were supplied. */
    std::optional<double> coverage;
    double sign_accuracy = 0.0;
};

/* Recovery metrics of an estimate against the generating truth.  Intervals,
 * when given, must hold one score-entry interval per (judge, item) in
 * row-major order. */
MetricReport compute_metrics(const HjaParams& estimate, const HjaParams& truth,
                             const std::vector<Interval>* score_intervals = nullptr);

enum class StudyGrid { n_cmp, het_scale };

struct StudyConfig {
    TruthSpec truth;
    StudyGrid grid_kind = StudyGrid::n_cmp;
    std::vector<double> grid;
    /* Comparison budget when the grid sweeps het_scale. */
    long n_cmp = 800;
    int n_seeds = 50;
    unsigned long seed = 0;
    SolverConfig solver;
    double level = 0.95;
    int threads = 1;
};

struct StudyStat {
    double mean = 0.0;
    /* Half-width 1.96 * sd / sqrt(n_ok) of the seed average. */
    double err95 = 0.0;
    int n_ok = 0;
};

struct StudyRow {
    std::string method;
    double grid_value = 0.0;
    std::map<std::string, StudyStat> metrics;
};

/* Sweeps the grid, fitting the structured model and the pooled,
 * sensitivity-only, and svd baselines on fresh data per seed, and
 * aggregates recovery metrics per (grid value, method).  Coverage rows are
 * produced for every method with a delta-method interval path. */
std::vector<StudyRow> run_recovery_study(const StudyConfig& config);

/* Long-format "method,grid_value,metric,mean,err95,n_ok" lines. */
std::string study_csv(const std::vector<StudyRow>& rows);

}  // namespace hja
