#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"
#include "hja/solver.hpp"

namespace hja {

/* Ambient coordinate order used for information matrices and gradients:
 * gamma (K), mu (N), then u and v column-major (K*r and N*r entries). */
int ambient_dim(int n_judges, int n_items, int rank);

/* Dimension of the constrained parameter set:
 * (K-1) + (N-1) + r(K+N-r-3). */
int free_dim(int n_judges, int n_items, int rank);

Eigen::VectorXd flatten_blocks(const Eigen::VectorXd& gamma_block, const Eigen::VectorXd& mu_block,
                               const Eigen::MatrixXd& u_block, const Eigen::MatrixXd& v_block);

/* Plug-in information matrix (1/n) sum n_kij p(1-p) g g' over observed
 * cells, in ambient coordinates; carries the connectivity report so
 * singular-information errors can name the disconnected pieces. */
struct FisherInfo {
    Eigen::MatrixXd ambient;
    double n_total = 0.0;
    GraphReport graph;
};

FisherInfo fisher_info(const HjaParams& params, const AggregatedCounts& counts);

/* Orthonormal basis of the constraint null space at the given point.  The
 * caller gets a chart for the constrained set; any two valid bases give the
 * same delta-method variances. */
struct TangentBasis {
    Eigen::MatrixXd basis;
    int d_free = 0;
};

TangentBasis tangent_basis(const HjaParams& params, double tol = 1e-10);

enum class TargetKind {
    consensus_contrast,  /* mu_i - mu_j */
    judge_contrast,      /* score gap of judge k on (i, j) */
    gamma_entry,         /* gamma_k */
    pairwise_prob,       /* win probability of judge k on (i, j) */
    score_entry,         /* score of judge k on item i */
    leverage,            /* residual row norm of judge k */
};

struct TargetSpec {
    TargetKind kind = TargetKind::consensus_contrast;
    int judge = -1;
    int item_i = -1;
    int item_j = -1;
};

struct Interval {
    std::string target;
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/* Projected covariance (B' I B)^{-1}, precomputed once per fit so interval
 * batches do not refactor the information matrix. */
struct TangentCovariance {
    Eigen::MatrixXd basis;
    Eigen::MatrixXd cov;
    double n_total = 0.0;
};

TangentCovariance tangent_covariance(const FisherInfo& info, const TangentBasis& basis);

Interval target_ci(const HjaParams& params, const TangentCovariance& covariance,
                   const TargetSpec& target, double level = 0.95);

Interval target_ci(const HjaParams& params, const FisherInfo& info, const TangentBasis& basis,
                   const TargetSpec& target, double level = 0.95);

/* One interval per score entry, row-major over (judge, item). */
std::vector<Interval> score_entry_intervals(const HjaParams& params, const AggregatedCounts& counts,
                                            double level = 0.95);

/* Residual row norm h_k and its ratio to the consensus component's scale. */
struct LeverageEntry {
    double h = 0.0;
    double rho = 0.0;
};

std::vector<LeverageEntry> leverage_diagnostics(const HjaParams& params, double eps = 1e-8);

}  // namespace hja
