#include "hja/inference.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "hja/errors.hpp"
#include "hja/likelihood.hpp"

namespace hja {

namespace {

struct Layout {
    int n_judges;
    int n_items;
    int rank;
    int gamma_at(int k) const { return k; }
    int mu_at(int i) const { return n_judges + i; }
    int u_at(int k, int m) const { return n_judges + n_items + m * n_judges + k; }
    int v_at(int i, int m) const { return n_judges + n_items + n_judges * rank + m * n_items + i; }
    int dim() const { return n_judges + n_items + (n_judges + n_items) * rank; }
};

Layout layout_of(const HjaParams& p) { return {p.num_judges(), p.num_items(), p.rank()}; }

/* Sparse ambient gradient of the linear predictor for one observed cell. */
void eta_gradient(const HjaParams& p, const Layout& lay, int k, int i, int j,
                  std::vector<std::pair<int, double>>* out) {
    out->clear();
    out->push_back({lay.gamma_at(k), p.mu(i) - p.mu(j)});
    out->push_back({lay.mu_at(i), p.gamma(k)});
    out->push_back({lay.mu_at(j), -p.gamma(k)});
    for (int m = 0; m < lay.rank; ++m) {
        out->push_back({lay.u_at(k, m), p.v(i, m) - p.v(j, m)});
        out->push_back({lay.v_at(i, m), p.u(k, m)});
        out->push_back({lay.v_at(j, m), -p.u(k, m)});
    }
}

constexpr double kEigenvalueFloor = 1e-10;

}  // namespace

int ambient_dim(int n_judges, int n_items, int rank) {
    return n_judges + n_items + (n_judges + n_items) * rank;
}

int free_dim(int n_judges, int n_items, int rank) {
    return (n_judges - 1) + (n_items - 1) + rank * (n_judges + n_items - rank - 3);
}

Eigen::VectorXd flatten_blocks(const Eigen::VectorXd& gamma_block, const Eigen::VectorXd& mu_block,
                               const Eigen::MatrixXd& u_block, const Eigen::MatrixXd& v_block) {
    Eigen::VectorXd flat(gamma_block.size() + mu_block.size() + u_block.size() + v_block.size());
    flat.head(gamma_block.size()) = gamma_block;
    flat.segment(gamma_block.size(), mu_block.size()) = mu_block;
    Eigen::Index at = gamma_block.size() + mu_block.size();
    flat.segment(at, u_block.size()) = Eigen::Map<const Eigen::VectorXd>(u_block.data(), u_block.size());
    at += u_block.size();
    flat.segment(at, v_block.size()) = Eigen::Map<const Eigen::VectorXd>(v_block.data(), v_block.size());
    return flat;
}

FisherInfo fisher_info(const HjaParams& params, const AggregatedCounts& counts) {
    if (params.num_judges() != counts.num_judges() || params.num_items() != counts.num_items()) {
        throw ValidationError("parameter dimensions disagree with the aggregated counts");
    }
    if (counts.n_total <= 0.0) throw ValidationError("no observations");
    const Layout lay = layout_of(params);
    FisherInfo info;
    info.n_total = counts.n_total;
    info.graph = check_connectivity(counts);
    info.ambient = Eigen::MatrixXd::Zero(lay.dim(), lay.dim());

    std::vector<std::pair<int, double>> grad;
    grad.reserve(3 + 3 * lay.rank);
    for (const auto& cell : counts.cells) {
        const double p = predict_prob(params, cell.judge, cell.item_i, cell.item_j);
        const double w = (cell.count / counts.n_total) * p * (1.0 - p);
        eta_gradient(params, lay, cell.judge, cell.item_i, cell.item_j, &grad);
        for (const auto& [a, va] : grad) {
            for (const auto& [b, vb] : grad) {
                info.ambient(a, b) += w * va * vb;
            }
        }
    }
    return info;
}

TangentBasis tangent_basis(const HjaParams& params, double tol) {
    const Layout lay = layout_of(params);
    const int r = lay.rank;
    const int n_rows = 2 + 3 * r + r * r;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_rows, lay.dim());

    int row = 0;
    for (int k = 0; k < lay.n_judges; ++k) jac(row, lay.gamma_at(k)) = 1.0;
    ++row;
    for (int i = 0; i < lay.n_items; ++i) jac(row, lay.mu_at(i)) = 1.0;
    ++row;
    for (int m = 0; m < r; ++m, ++row) {
        for (int k = 0; k < lay.n_judges; ++k) jac(row, lay.u_at(k, m)) = 1.0;
    }
    for (int m = 0; m < r; ++m, ++row) {
        for (int i = 0; i < lay.n_items; ++i) jac(row, lay.v_at(i, m)) = 1.0;
    }
    for (int m = 0; m < r; ++m, ++row) {
        for (int i = 0; i < lay.n_items; ++i) {
            jac(row, lay.mu_at(i)) = params.v(i, m);
            jac(row, lay.v_at(i, m)) = params.mu(i);
        }
    }
    for (int l = 0; l < r; ++l) {
        for (int m = l; m < r; ++m, ++row) {
            for (int i = 0; i < lay.n_items; ++i) {
                jac(row, lay.v_at(i, l)) += params.v(i, m);
                jac(row, lay.v_at(i, m)) += params.v(i, l);
            }
        }
    }
    for (int l = 0; l < r; ++l) {
        for (int m = l + 1; m < r; ++m, ++row) {
            for (int k = 0; k < lay.n_judges; ++k) {
                jac(row, lay.u_at(k, l)) += params.u(k, m);
                jac(row, lay.u_at(k, m)) += params.u(k, l);
            }
        }
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullV);
    const Eigen::VectorXd& sing = svd.singularValues();
    const double cutoff = (sing.size() ? sing(0) : 0.0) * tol;
    int rank_c = 0;
    for (Eigen::Index s = 0; s < sing.size(); ++s) {
        if (sing(s) > cutoff) ++rank_c;
    }
    if (rank_c < n_rows) {
        throw ChartError("constraint Jacobian rank " + std::to_string(rank_c) + " below expected " +
                         std::to_string(n_rows) + ", anchoring is degenerate at this point");
    }
    TangentBasis basis;
    basis.d_free = lay.dim() - rank_c;
    basis.basis = svd.matrixV().rightCols(basis.d_free);
    if (basis.d_free != free_dim(lay.n_judges, lay.n_items, r)) {
        throw ChartError("tangent dimension " + std::to_string(basis.d_free) +
                         " disagrees with the expected " +
                         std::to_string(free_dim(lay.n_judges, lay.n_items, r)));
    }
    return basis;
}

namespace {

std::string graph_note(const GraphReport& graph) {
    std::string s = graph.pooled_connected ? "pooled graph connected" : "pooled graph disconnected";
    std::string bad;
    for (std::size_t k = 0; k < graph.per_judge_connected.size(); ++k) {
        if (!graph.per_judge_connected[k]) {
            if (!bad.empty()) bad += ",";
            bad += std::to_string(k);
        }
    }
    if (!bad.empty()) s += "; disconnected judge graphs: " + bad;
    return s;
}

}  // namespace

TangentCovariance tangent_covariance(const FisherInfo& info, const TangentBasis& basis) {
    const Eigen::MatrixXd projected = basis.basis.transpose() * info.ambient * basis.basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projected);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double top = vals.size() ? vals(vals.size() - 1) : 0.0;
    if (vals.size() == 0 || top <= 0.0 || vals(0) < kEigenvalueFloor * top) {
        throw SingularInformation(
            "projected information matrix numerically singular (min eigenvalue " +
            std::to_string(vals.size() ? vals(0) : 0.0) + "); " + graph_note(info.graph));
    }
    TangentCovariance cov;
    cov.basis = basis.basis;
    cov.n_total = info.n_total;
    cov.cov = eig.eigenvectors() * vals.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return cov;
}

namespace {

std::string target_name(const TargetSpec& t) {
    switch (t.kind) {
        case TargetKind::consensus_contrast:
            return "consensus_contrast(" + std::to_string(t.item_i) + "," + std::to_string(t.item_j) + ")";
        case TargetKind::judge_contrast:
            return "judge_contrast(" + std::to_string(t.judge) + "," + std::to_string(t.item_i) + "," +
                   std::to_string(t.item_j) + ")";
        case TargetKind::gamma_entry:
            return "gamma(" + std::to_string(t.judge) + ")";
        case TargetKind::pairwise_prob:
            return "pairwise_prob(" + std::to_string(t.judge) + "," + std::to_string(t.item_i) + "," +
                   std::to_string(t.item_j) + ")";
        case TargetKind::score_entry:
            return "score_entry(" + std::to_string(t.judge) + "," + std::to_string(t.item_i) + ")";
        case TargetKind::leverage:
            return "leverage(" + std::to_string(t.judge) + ")";
    }
    return "target";
}

void require_judge(const HjaParams& p, int k) {
    if (k < 0 || k >= p.num_judges()) throw ValidationError("judge index out of range");
}

void require_item(const HjaParams& p, int i) {
    if (i < 0 || i >= p.num_items()) throw ValidationError("item index out of range");
}

}  // namespace

Interval target_ci(const HjaParams& params, const TangentCovariance& covariance,
                   const TargetSpec& target, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
    const Layout lay = layout_of(params);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(lay.dim());
    double estimate = 0.0;
    std::vector<std::pair<int, double>> grad;

    switch (target.kind) {
        case TargetKind::consensus_contrast: {
            require_item(params, target.item_i);
            require_item(params, target.item_j);
            estimate = params.mu(target.item_i) - params.mu(target.item_j);
            a(lay.mu_at(target.item_i)) += 1.0;
            a(lay.mu_at(target.item_j)) -= 1.0;
            break;
        }
        case TargetKind::judge_contrast: {
            require_judge(params, target.judge);
            estimate = linear_predictor(params, target.judge, target.item_i, target.item_j);
            eta_gradient(params, lay, target.judge, target.item_i, target.item_j, &grad);
            for (const auto& [idx, val] : grad) a(idx) += val;
            break;
        }
        case TargetKind::gamma_entry: {
            require_judge(params, target.judge);
            estimate = params.gamma(target.judge);
            a(lay.gamma_at(target.judge)) = 1.0;
            break;
        }
        case TargetKind::pairwise_prob: {
            require_judge(params, target.judge);
            estimate = predict_prob(params, target.judge, target.item_i, target.item_j);
            const double weight = estimate * (1.0 - estimate);
            eta_gradient(params, lay, target.judge, target.item_i, target.item_j, &grad);
            for (const auto& [idx, val] : grad) a(idx) += weight * val;
            break;
        }
        case TargetKind::score_entry: {
            require_judge(params, target.judge);
            require_item(params, target.item_i);
            const int k = target.judge;
            const int i = target.item_i;
            estimate = params.gamma(k) * params.mu(i);
            if (lay.rank > 0) estimate += params.u.row(k).dot(params.v.row(i));
            a(lay.gamma_at(k)) = params.mu(i);
            a(lay.mu_at(i)) = params.gamma(k);
            for (int m = 0; m < lay.rank; ++m) {
                a(lay.u_at(k, m)) = params.v(i, m);
                a(lay.v_at(i, m)) = params.u(k, m);
            }
            break;
        }
        case TargetKind::leverage: {
            require_judge(params, target.judge);
            const int k = target.judge;
            Eigen::VectorXd w = Eigen::VectorXd::Zero(lay.n_items);
            if (lay.rank > 0) w = params.v * params.u.row(k).transpose();
            const double h = w.norm();
            if (h <= 1e-8) {
                throw ValidationError("leverage target not differentiable at h <= 1e-8");
            }
            estimate = h;
            for (int m = 0; m < lay.rank; ++m) {
                a(lay.u_at(k, m)) = params.v.col(m).dot(w) / h;
                for (int i = 0; i < lay.n_items; ++i) {
                    a(lay.v_at(i, m)) = w(i) * params.u(k, m) / h;
                }
            }
            break;
        }
    }

    const Eigen::VectorXd projected = covariance.basis.transpose() * a;
    const double variance = projected.dot(covariance.cov * projected) / covariance.n_total;
    const double se = std::sqrt(std::max(variance, 0.0));
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(),
                                           0.5 + level / 2.0);
    Interval out;
    out.target = target_name(target);
    out.estimate = estimate;
    out.se = se;
    out.lower = estimate - z * se;
    out.upper = estimate + z * se;
    return out;
}

Interval target_ci(const HjaParams& params, const FisherInfo& info, const TangentBasis& basis,
                   const TargetSpec& target, double level) {
    return target_ci(params, tangent_covariance(info, basis), target, level);
}

std::vector<Interval> score_entry_intervals(const HjaParams& params, const AggregatedCounts& counts,
                                            double level) {
    const TangentCovariance covariance =
        tangent_covariance(fisher_info(params, counts), tangent_basis(params));
    std::vector<Interval> out;
    out.reserve(static_cast<std::size_t>(params.num_judges()) * params.num_items());
    for (int k = 0; k < params.num_judges(); ++k) {
        for (int i = 0; i < params.num_items(); ++i) {
            out.push_back(target_ci(params, covariance, {TargetKind::score_entry, k, i, -1}, level));
        }
    }
    return out;
}

std::vector<LeverageEntry> leverage_diagnostics(const HjaParams& params, double eps) {
    const double mu_norm = params.mu.norm();
    std::vector<LeverageEntry> out(params.num_judges());
    for (int k = 0; k < params.num_judges(); ++k) {
        double h = 0.0;
        if (params.rank() > 0) h = (params.v * params.u.row(k).transpose()).norm();
        out[k].h = h;
        out[k].rho = h / (std::abs(params.gamma(k)) * mu_norm + eps);
    }
    return out;
}

}  // namespace hja
