#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"

namespace hja {

struct SolverConfig {
    int rank = 0;
    /* Proximal weight on both block updates; grows by tau_growth whenever
     * re-anchoring trips a guard. */
    double tau = 30.0;
    double tau_growth = 10.0;
    /* Relative change of the negative log-likelihood that stops the outer
     * alternation. */
    double tol = 1e-8;
    int max_iters = 500;
    /* Gradient norm target for each block subproblem. */
    double inner_tol = 1e-9;
    double delta_mu = 1e-6;
    double delta_sigma = 1e-8;
    /* Permits judges with disconnected comparison graphs; their warm-start
     * rows fall back to the pooled scores.  The pooled graph must always be
     * connected. */
    bool allow_disconnected = false;
};

struct FitResult {
    HjaParams params;
    /* Negative log-likelihood at the initial point and after every outer
     * iteration; nonincreasing up to round-off. */
    std::vector<double> nll_trace;
    bool converged = false;
    int iterations = 0;
    int guard_failures = 0;
    double final_nll = 0.0;
    std::vector<std::string> warnings;
};

/* Sums counts across judges into a single pseudo-judge. */
AggregatedCounts pool_judges(const AggregatedCounts& counts, const std::string& label = "pooled");

/* Maximum-likelihood paired-comparison scores on the judge-pooled counts,
 * centered to sum zero. */
Eigen::VectorXd fit_pooled_btl(const AggregatedCounts& counts, double tol = 1e-9);

/* Same model restricted to one judge's cells; every item must be reachable
 * in that judge's comparison graph. */
Eigen::VectorXd fit_judgewise_btl(const AggregatedCounts& counts, int judge, double tol = 1e-9);

/* Warm start: pooled consensus, unit sensitivities, factor pair from a
 * truncated SVD of the judge-centered residual of the judge-wise scores,
 * then re-anchored onto the canonical set.  When re-anchoring fails the
 * rank is lowered one step at a time (with a warning) before giving up. */
HjaParams initialize(const AggregatedCounts& counts, int rank, const SolverConfig& config,
                     std::vector<std::string>* warnings = nullptr);

/* Proximal anchored alternating maximum likelihood: judge block, item
 * block, re-anchor, repeat until the relative likelihood change drops below
 * config.tol. */
FitResult fit(const AggregatedCounts& counts, const SolverConfig& config);

enum class BaselineKind {
    /* Unit sensitivities with pooled consensus scores. */
    pooled,
    /* Free sensitivities, no residual factors (rank-0 fit). */
    sensitivity_only,
    /* Judge-wise scores, truncated SVD at rank+1, then the canonical split
     * at the requested rank. */
    btl_svd,
};

HjaParams fit_baseline(const AggregatedCounts& counts, BaselineKind kind, int rank = 0,
                       const SolverConfig& config = {});

}  // namespace hja
