#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace hja {

/* Structured judge-item parameters.  gamma holds per-judge sensitivities,
 * mu the consensus scores, u/v the rank-r residual factor pair, so the score
 * matrix is gamma * mu' + u * v'. */
struct HjaParams {
    Eigen::VectorXd gamma;
    Eigen::VectorXd mu;
    Eigen::MatrixXd u;
    Eigen::MatrixXd v;

    int num_judges() const { return static_cast<int>(gamma.size()); }
    int num_items() const { return static_cast<int>(mu.size()); }
    int rank() const { return static_cast<int>(u.cols()); }
};

/* K x N score matrix with every row summing to zero. */
struct ScoreMatrix {
    Eigen::MatrixXd s;
};

/* Largest admissible residual rank for K judges and N items. */
int max_rank(int n_judges, int n_items);

ScoreMatrix compose(const HjaParams& params);

/* Flips paired factor columns so the first entry of each u column whose
 * magnitude exceeds 1e-12 is positive; all-tiny columns are left alone. */
void sign_anchor(Eigen::MatrixXd& u, Eigen::MatrixXd& v);

struct DecomposeDiagnostics {
    Eigen::VectorXd residual_singular_values;
    int chosen_rank = 0;
    /* Set when the singular-value gap at the truncation cut is below tol,
     * i.e. the retained rank is not cleanly separated from the remainder. */
    bool ambiguous_rank = false;
};

/* Canonical split of a row-centered score matrix: consensus direction from
 * the column means, sensitivities by projection onto it, residual factors
 * from the thin SVD of what remains.  rank = nullopt selects every singular
 * value above 1e-10 times the largest. */
HjaParams decompose(const ScoreMatrix& s, std::optional<int> rank = std::nullopt, double tol = 1e-8,
                    DecomposeDiagnostics* diagnostics = nullptr);

struct ConstraintEntry {
    std::string name;
    double residual = 0.0;
    bool pass = true;
};

struct ConstraintReport {
    std::vector<ConstraintEntry> entries;
    double tol = 0.0;
    bool pass = true;

    double max_residual() const;
};

/* Audits the canonical normalization: centering of mu/u/v, gamma sum, mu-v
 * orthogonality, v scaling, diagonality and strict ordering of u'u/K, and
 * the column sign anchor. */
ConstraintReport check_constraints(const HjaParams& params, double tol = 1e-8);

enum class ReanchorGuard { none, mu_norm, spectral_gap };

struct ReanchorResult {
    bool ok = false;
    ReanchorGuard guard = ReanchorGuard::none;
    HjaParams params;
};

/* Maps affinely feasible blocks (centered mu and factor columns, gamma
 * summing to K) back to the canonical set without changing the composed
 * score matrix.  Fails, rather than throwing, when the consensus norm or the
 * r-th residual singular value falls below its guard threshold. */
ReanchorResult reanchor(const Eigen::VectorXd& gamma, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, double delta_mu = 1e-6,
                        double delta_sigma = 1e-8);

}  // namespace hja
