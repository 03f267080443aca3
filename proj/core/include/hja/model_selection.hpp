#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/solver.hpp"

namespace hja {

/* Rank-dependent parameter count r(K+N-r-3) entering the BIC penalty. */
int model_dimension(int n_judges, int n_items, int rank);

/* 2 * nll + d_r * log(n_total) at the fitted parameters. */
double bic(const FitResult& fit, const AggregatedCounts& counts);

enum class RankMethod { bic, cv };

struct RankSelection {
    int chosen_rank = 0;
    RankMethod method = RankMethod::bic;
    /* BIC value or mean per-fold validation likelihood per candidate rank;
     * candidates whose fits all failed are absent. */
    std::map<int, double> per_rank_scores;
    std::vector<std::string> warnings;
};

/* Fits every rank 0..r_max and picks the best score, smaller rank on ties.
 * Cross-validation partitions records into record-level folds shared by all
 * candidates; folds whose training graph violates the connectivity
 * requirement are skipped with a warning. */
RankSelection select_rank(const std::vector<ComparisonRecord>& records, RankMethod method, int r_max,
                          int folds, unsigned long seed, const SolverConfig& config);

/* Singular values, largest first, of the judge-wise score matrix minus the
 * rank-0 fit; a cliff after the first few values suggests the residual
 * rank. */
Eigen::VectorXd spectral_scree(const AggregatedCounts& counts, const SolverConfig& config = {});

}  // namespace hja
