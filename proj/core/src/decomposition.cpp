#include "hja/decomposition.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hja/errors.hpp"

namespace hja {

namespace {

constexpr double kSignAnchorFloor = 1e-12;

void require_shapes(const HjaParams& p) {
    if (p.gamma.size() == 0 || p.mu.size() == 0) throw ValidationError("empty parameter block");
    if (p.u.rows() != p.gamma.size() || p.v.rows() != p.mu.size() || p.u.cols() != p.v.cols()) {
        throw ValidationError("factor shapes disagree with gamma/mu lengths");
    }
}

}  // namespace

int max_rank(int n_judges, int n_items) { return std::min(n_judges - 1, n_items - 2); }

ScoreMatrix compose(const HjaParams& params) {
    require_shapes(params);
    ScoreMatrix out;
    out.s = params.gamma * params.mu.transpose();
    if (params.rank() > 0) out.s += params.u * params.v.transpose();
    return out;
}

void sign_anchor(Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
    for (Eigen::Index m = 0; m < u.cols(); ++m) {
        for (Eigen::Index k = 0; k < u.rows(); ++k) {
            if (std::abs(u(k, m)) > kSignAnchorFloor) {
                if (u(k, m) < 0.0) {
                    u.col(m) = -u.col(m);
                    v.col(m) = -v.col(m);
                }
                break;
            }
        }
    }
}

HjaParams decompose(const ScoreMatrix& score, std::optional<int> rank, double tol,
                    DecomposeDiagnostics* diagnostics) {
    const Eigen::MatrixXd& s = score.s;
    const int n_judges = static_cast<int>(s.rows());
    const int n_items = static_cast<int>(s.cols());
    if (n_judges < 1 || n_items < 2) throw ValidationError("score matrix needs >= 1 row, >= 2 columns");
    const double worst_row_sum = s.rowwise().sum().cwiseAbs().maxCoeff();
    if (worst_row_sum > tol) {
        throw ValidationError("score matrix rows must sum to zero (worst residual " +
                              std::to_string(worst_row_sum) + ")");
    }

    const Eigen::VectorXd col_total = s.colwise().sum().transpose();
    if (col_total.norm() <= tol) {
        throw DegenerateConsensus("column totals are numerically zero, no consensus direction");
    }
    HjaParams params;
    params.mu = col_total / n_judges;
    const double mu_sq = params.mu.squaredNorm();
    params.gamma = s * params.mu / mu_sq;

    const Eigen::MatrixXd residual = s - params.gamma * params.mu.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(residual, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sing = svd.singularValues();

    const int bound = std::max(max_rank(n_judges, n_items), 0);
    int r;
    if (rank.has_value()) {
        r = *rank;
        if (r < 0) throw ValidationError("rank must be nonnegative");
        if (r > max_rank(n_judges, n_items)) {
            throw RankTooLarge("rank " + std::to_string(r) + " exceeds min(K-1, N-2) = " +
                               std::to_string(max_rank(n_judges, n_items)));
        }
    } else {
        const double cutoff = 1e-10 * (sing.size() ? sing(0) : 0.0);
        r = 0;
        while (r < std::min<int>(bound, static_cast<int>(sing.size())) && sing(r) > cutoff) ++r;
    }

    const double scale = std::sqrt(static_cast<double>(n_items));
    params.u = svd.matrixU().leftCols(r) * sing.head(r).asDiagonal() / scale;
    params.v = scale * svd.matrixV().leftCols(r);
    sign_anchor(params.u, params.v);

    if (diagnostics) {
        diagnostics->residual_singular_values = sing;
        diagnostics->chosen_rank = r;
        diagnostics->ambiguous_rank = false;
        if (r >= 1) {
            const double kept = sing(r - 1);
            const double next = r < sing.size() ? sing(r) : 0.0;
            diagnostics->ambiguous_rank = (kept - next) < tol;
        }
    }
    return params;
}

double ConstraintReport::max_residual() const {
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.residual);
    return worst;
}

ConstraintReport check_constraints(const HjaParams& params, double tol) {
    require_shapes(params);
    const int n_judges = params.num_judges();
    const int n_items = params.num_items();
    const int r = params.rank();

    ConstraintReport report;
    report.tol = tol;
    auto add = [&](const std::string& name, double residual) {
        report.entries.push_back({name, residual, residual <= tol});
    };

    add("mu_centering", std::abs(params.mu.sum()));
    add("v_centering", r ? params.v.colwise().sum().cwiseAbs().maxCoeff() : 0.0);
    add("u_centering", r ? params.u.colwise().sum().cwiseAbs().maxCoeff() : 0.0);
    add("gamma_sum", std::abs(params.gamma.sum() - n_judges));
    add("mu_v_orthogonality", r ? (params.mu.transpose() * params.v).cwiseAbs().maxCoeff() : 0.0);

    double v_scaling = 0.0;
    double u_offdiag = 0.0;
    double d_order = 0.0;
    if (r) {
        const Eigen::MatrixXd vv =
            params.v.transpose() * params.v / static_cast<double>(n_items) -
            Eigen::MatrixXd::Identity(r, r);
        v_scaling = vv.cwiseAbs().maxCoeff();
        const Eigen::MatrixXd uu = params.u.transpose() * params.u / static_cast<double>(n_judges);
        for (int a = 0; a < r; ++a) {
            for (int b = 0; b < r; ++b) {
                if (a != b) u_offdiag = std::max(u_offdiag, std::abs(uu(a, b)));
            }
        }
        d_order = std::max(0.0, -uu(r - 1, r - 1));
        for (int m = 0; m + 1 < r; ++m) d_order = std::max(d_order, uu(m + 1, m + 1) - uu(m, m));
    }
    add("v_scaling", v_scaling);
    add("u_diagonality", u_offdiag);
    add("d_ordering", d_order);

    double sign_residual = 0.0;
    for (int m = 0; m < r; ++m) {
        for (int k = 0; k < n_judges; ++k) {
            if (std::abs(params.u(k, m)) > kSignAnchorFloor) {
                if (params.u(k, m) < 0.0) sign_residual = std::max(sign_residual, -params.u(k, m));
                break;
            }
        }
    }
    add("u_sign_anchor", sign_residual);

    report.pass = std::all_of(report.entries.begin(), report.entries.end(),
                              [](const ConstraintEntry& e) { return e.pass; });
    return report;
}

ReanchorResult reanchor(const Eigen::VectorXd& gamma, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, double delta_mu,
                        double delta_sigma) {
    ReanchorResult result;
    const int r = static_cast<int>(u.cols());
    const int n_items = static_cast<int>(mu.size());

    const double mu_sq = mu.squaredNorm();
    if (std::sqrt(mu_sq) < delta_mu) {
        result.guard = ReanchorGuard::mu_norm;
        return result;
    }
    result.params.mu = mu;
    if (r == 0) {
        result.params.gamma = gamma;
        result.params.u = u;
        result.params.v = v;
        result.ok = true;
        return result;
    }

    /* Shift the factor pair's mu-component into gamma; the composed score
     * matrix is unchanged because u*a*mu' cancels between the two terms. */
    const Eigen::VectorXd a = v.transpose() * mu / mu_sq;
    const Eigen::MatrixXd v_perp = v - mu * a.transpose();
    result.params.gamma = gamma + u * a;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(u * v_perp.transpose(),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sing = svd.singularValues();
    if (sing.size() < r || sing(r - 1) < delta_sigma) {
        result.guard = ReanchorGuard::spectral_gap;
        return result;
    }
    const double scale = std::sqrt(static_cast<double>(n_items));
    result.params.u = svd.matrixU().leftCols(r) * sing.head(r).asDiagonal() / scale;
    result.params.v = scale * svd.matrixV().leftCols(r);
    sign_anchor(result.params.u, result.params.v);
    result.ok = true;
    return result;
}

}  // namespace hja
