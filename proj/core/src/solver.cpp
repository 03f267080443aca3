#include "hja/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "hja/errors.hpp"
#include "hja/likelihood.hpp"
#include "lbfgs.hpp"

namespace hja {

namespace {

/* Affine elimination for a (vector, matrix) block whose vector entries must
 * total vec_sum and whose matrix columns must each total zero: the last
 * row carries the slack, the rest are free coordinates. */
Eigen::VectorXd pack_block(const Eigen::VectorXd& vec, const Eigen::MatrixXd& mat) {
    const auto n = vec.size();
    const auto r = mat.cols();
    Eigen::VectorXd x((n - 1) * (1 + r));
    x.head(n - 1) = vec.head(n - 1);
    for (Eigen::Index m = 0; m < r; ++m) {
        x.segment((n - 1) * (1 + m), n - 1) = mat.col(m).head(n - 1);
    }
    return x;
}

void unpack_block(const Eigen::VectorXd& x, double vec_sum, Eigen::VectorXd& vec,
                  Eigen::MatrixXd& mat) {
    const auto n = vec.size();
    const auto r = mat.cols();
    vec.head(n - 1) = x.head(n - 1);
    vec(n - 1) = vec_sum - x.head(n - 1).sum();
    for (Eigen::Index m = 0; m < r; ++m) {
        mat.col(m).head(n - 1) = x.segment((n - 1) * (1 + m), n - 1);
        mat(n - 1, m) = -mat.col(m).head(n - 1).sum();
    }
}

Eigen::VectorXd fold_gradient(const Eigen::VectorXd& gvec, const Eigen::MatrixXd& gmat) {
    const auto n = gvec.size();
    const auto r = gmat.cols();
    Eigen::VectorXd g((n - 1) * (1 + r));
    g.head(n - 1) = gvec.head(n - 1).array() - gvec(n - 1);
    for (Eigen::Index m = 0; m < r; ++m) {
        g.segment((n - 1) * (1 + m), n - 1) = gmat.col(m).head(n - 1).array() - gmat(n - 1, m);
    }
    return g;
}

/* Paired-comparison MLE over centered scores for an arbitrary cell subset. */
Eigen::VectorXd btl_mle(const std::vector<CountCell>& cells, int n_items, double tol) {
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gfree) {
        Eigen::VectorXd s(n_items);
        s.head(n_items - 1) = x;
        s(n_items - 1) = -x.sum();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n_items);
        double f = 0.0;
        for (const auto& c : cells) {
            const double eta = s(c.item_i) - s(c.item_j);
            const double y_bar = c.wins / c.count;
            f += c.count * (-y_bar * eta + softplus(eta));
            const double d = c.count * (sigmoid(eta) - y_bar);
            g(c.item_i) += d;
            g(c.item_j) -= d;
        }
        gfree = g.head(n_items - 1).array() - g(n_items - 1);
        return f;
    };
    detail::LbfgsOptions options;
    options.grad_tol = tol;
    options.max_iters = 500;
    auto result = detail::minimize(objective, Eigen::VectorXd::Zero(n_items - 1), options);
    Eigen::VectorXd s(n_items);
    s.head(n_items - 1) = result.x;
    s(n_items - 1) = -result.x.sum();
    s.array() -= s.mean();
    return s;
}

void check_subset_connected(const std::vector<CountCell>& cells, int n_items,
                            const std::string& what, const IdMap& id_map) {
    std::vector<int> parent(n_items);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& c : cells) {
        int a = find(c.item_i);
        int b = find(c.item_j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<int>> comps(n_items);
    for (int v = 0; v < n_items; ++v) comps[find(v)].push_back(v);
    std::string listing;
    int n_comps = 0;
    for (const auto& comp : comps) {
        if (comp.empty()) continue;
        ++n_comps;
        listing += listing.empty() ? "{" : ",{";
        for (std::size_t t = 0; t < comp.size(); ++t) {
            if (t) listing += ",";
            listing += id_map.items[comp[t]];
        }
        listing += "}";
    }
    if (n_comps > 1) throw ConnectivityError(what + " comparison graph disconnected: " + listing);
}

std::vector<CountCell> judge_cells(const AggregatedCounts& counts, int judge) {
    std::vector<CountCell> out;
    for (const auto& c : counts.cells) {
        if (c.judge == judge) out.push_back(c);
    }
    return out;
}

}  // namespace

AggregatedCounts pool_judges(const AggregatedCounts& counts, const std::string& label) {
    AggregatedCounts pooled;
    pooled.id_map.add_judge(label);
    pooled.id_map.items = counts.id_map.items;
    pooled.id_map.item_index = counts.id_map.item_index;
    std::map<std::pair<int, int>, std::pair<double, double>> table;
    for (const auto& c : counts.cells) {
        auto& cell = table[{c.item_i, c.item_j}];
        cell.first += c.count;
        cell.second += c.wins;
    }
    for (const auto& [key, agg] : table) {
        pooled.cells.push_back({0, key.first, key.second, agg.first, agg.second});
        pooled.n_total += agg.first;
    }
    return pooled;
}

Eigen::VectorXd fit_pooled_btl(const AggregatedCounts& counts, double tol) {
    if (counts.cells.empty()) throw ValidationError("no cells to fit");
    AggregatedCounts pooled = pool_judges(counts);
    check_subset_connected(pooled.cells, pooled.num_items(), "pooled", counts.id_map);
    return btl_mle(pooled.cells, pooled.num_items(), tol);
}

Eigen::VectorXd fit_judgewise_btl(const AggregatedCounts& counts, int judge, double tol) {
    if (judge < 0 || judge >= counts.num_judges()) throw ValidationError("judge index out of range");
    auto cells = judge_cells(counts, judge);
    check_subset_connected(cells, counts.num_items(), "judge " + counts.id_map.judges[judge],
                           counts.id_map);
    return btl_mle(cells, counts.num_items(), tol);
}

HjaParams initialize(const AggregatedCounts& counts, int rank, const SolverConfig& config,
                     std::vector<std::string>* warnings) {
    const int n_judges = counts.num_judges();
    const int n_items = counts.num_items();
    if (n_judges < 1 || n_items < 2) throw ValidationError("need at least 1 judge and 2 items");
    if (rank < 0 || rank > max_rank(n_judges, n_items)) {
        throw RankTooLarge("rank " + std::to_string(rank) + " exceeds min(K-1, N-2) = " +
                           std::to_string(max_rank(n_judges, n_items)));
    }
    const GraphReport graph = check_connectivity(counts);
    if (!graph.pooled_connected ||
        (!config.allow_disconnected && !graph.all_judges_connected())) {
        throw ConnectivityError(describe_components(graph, counts.id_map));
    }

    Eigen::VectorXd mu0 = fit_pooled_btl(counts, config.inner_tol);
    mu0.array() -= mu0.mean();
    const Eigen::VectorXd gamma0 = Eigen::VectorXd::Ones(n_judges);

    Eigen::MatrixXd judgewise(n_judges, n_items);
    for (int k = 0; k < n_judges; ++k) {
        if (graph.per_judge_connected[k]) {
            judgewise.row(k) = fit_judgewise_btl(counts, k, config.inner_tol);
        } else {
            judgewise.row(k) = mu0;
            if (warnings) {
                warnings->push_back("judge " + counts.id_map.judges[k] +
                                    " graph disconnected, warm start falls back to pooled scores");
            }
        }
    }

    Eigen::MatrixXd residual = judgewise - gamma0 * mu0.transpose();
    residual.rowwise() -= residual.colwise().mean();

    Eigen::MatrixXd u0(n_judges, 0), v0(n_items, 0);
    if (rank > 0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(residual, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd root = svd.singularValues().head(rank).cwiseSqrt();
        u0 = svd.matrixU().leftCols(rank) * root.asDiagonal();
        v0 = svd.matrixV().leftCols(rank) * root.asDiagonal();
    }
    for (int r = rank;; --r) {
        ReanchorResult anchored = reanchor(gamma0, mu0, u0.leftCols(r), v0.leftCols(r),
                                           config.delta_mu, config.delta_sigma);
        if (anchored.ok) {
            if (r < rank && warnings) {
                warnings->push_back("re-anchoring failed at rank " + std::to_string(rank) +
                                    ", warm start reduced to rank " + std::to_string(r));
            }
            return std::move(anchored.params);
        }
        if (r == 0) {
            throw DegenerateConsensus("consensus norm below delta_mu at initialization");
        }
    }
}

namespace {

void solve_judge_block(HjaParams& params, const AggregatedCounts& counts, double tau,
                       double inner_tol) {
    const int n_judges = params.num_judges();
    if (n_judges < 2) return;
    const Eigen::VectorXd gamma_center = params.gamma;
    const Eigen::MatrixXd u_center = params.u;
    HjaParams work = params;
    ParamGrad grad;
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gfree) {
        unpack_block(x, static_cast<double>(n_judges), work.gamma, work.u);
        double f = nll_with_gradient(work, counts, &grad);
        f += 0.5 * tau *
             ((work.gamma - gamma_center).squaredNorm() + (work.u - u_center).squaredNorm());
        grad.gamma += tau * (work.gamma - gamma_center);
        grad.u += tau * (work.u - u_center);
        gfree = fold_gradient(grad.gamma, grad.u);
        return f;
    };
    detail::LbfgsOptions options;
    options.grad_tol = inner_tol;
    options.rel_grad_tol = 1e-3;
    options.max_iters = 100;
    auto result = detail::minimize(objective, pack_block(params.gamma, params.u), options);
    unpack_block(result.x, static_cast<double>(n_judges), params.gamma, params.u);
}

void solve_item_block(HjaParams& params, const AggregatedCounts& counts, double tau,
                      double inner_tol) {
    const int n_items = params.num_items();
    const Eigen::VectorXd mu_center = params.mu;
    const Eigen::MatrixXd v_center = params.v;
    HjaParams work = params;
    ParamGrad grad;
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gfree) {
        unpack_block(x, 0.0, work.mu, work.v);
        double f = nll_with_gradient(work, counts, &grad);
        f += 0.5 * tau * ((work.mu - mu_center).squaredNorm() + (work.v - v_center).squaredNorm());
        grad.mu += tau * (work.mu - mu_center);
        grad.v += tau * (work.v - v_center);
        gfree = fold_gradient(grad.mu, grad.v);
        return f;
    };
    detail::LbfgsOptions options;
    options.grad_tol = inner_tol;
    options.rel_grad_tol = 1e-3;
    options.max_iters = 100;
    auto result = detail::minimize(objective, pack_block(params.mu, params.v), options);
    unpack_block(result.x, 0.0, params.mu, params.v);
}

}  // namespace

FitResult fit(const AggregatedCounts& counts, const SolverConfig& config) {
    FitResult out;
    HjaParams theta = initialize(counts, config.rank, config, &out.warnings);
    double tau = config.tau;
    double value = nll(theta, counts);
    out.nll_trace.push_back(value);

    constexpr int max_guard_failures = 20;
    int iter = 0;
    while (iter < config.max_iters && !out.converged) {
        HjaParams next;
        while (true) {
            HjaParams trial = theta;
            solve_judge_block(trial, counts, tau, config.inner_tol);
            solve_item_block(trial, counts, tau, config.inner_tol);
            ReanchorResult anchored =
                reanchor(trial.gamma, trial.mu, trial.u, trial.v, config.delta_mu, config.delta_sigma);
            if (anchored.ok) {
                next = std::move(anchored.params);
                break;
            }
            ++out.guard_failures;
            if (out.guard_failures > max_guard_failures) {
                throw SolverStalled("re-anchoring failed " + std::to_string(out.guard_failures) +
                                    " times, last guard " +
                                    (anchored.guard == ReanchorGuard::mu_norm ? std::string("mu_norm")
                                                                             : std::string("spectral_gap")));
            }
            tau *= config.tau_growth;
        }
        theta = std::move(next);
        const double next_value = nll(theta, counts);
        out.nll_trace.push_back(next_value);
        ++iter;
        if (std::abs(next_value - value) / (1.0 + std::abs(value)) < config.tol) {
            out.converged = true;
        }
        value = next_value;
    }
    out.params = std::move(theta);
    out.iterations = iter;
    out.final_nll = value;
    return out;
}

HjaParams fit_baseline(const AggregatedCounts& counts, BaselineKind kind, int rank,
                       const SolverConfig& config) {
    switch (kind) {
        case BaselineKind::pooled: {
            HjaParams params;
            params.mu = fit_pooled_btl(counts, config.inner_tol);
            params.mu.array() -= params.mu.mean();
            params.gamma = Eigen::VectorXd::Ones(counts.num_judges());
            params.u.resize(counts.num_judges(), 0);
            params.v.resize(counts.num_items(), 0);
            return params;
        }
        case BaselineKind::sensitivity_only: {
            SolverConfig rank0 = config;
            rank0.rank = 0;
            return fit(counts, rank0).params;
        }
        case BaselineKind::btl_svd: {
            const int n_judges = counts.num_judges();
            const int n_items = counts.num_items();
            if (rank < 0 || rank > max_rank(n_judges, n_items)) {
                throw RankTooLarge("rank " + std::to_string(rank) + " exceeds min(K-1, N-2) = " +
                                   std::to_string(max_rank(n_judges, n_items)));
            }
            Eigen::MatrixXd scores(n_judges, n_items);
            for (int k = 0; k < n_judges; ++k) {
                scores.row(k) = fit_judgewise_btl(counts, k, config.inner_tol);
            }
            Eigen::BDCSVD<Eigen::MatrixXd> svd(scores, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const int keep = std::min<int>(rank + 1, static_cast<int>(svd.singularValues().size()));
            const Eigen::MatrixXd truncated = svd.matrixU().leftCols(keep) *
                                              svd.singularValues().head(keep).asDiagonal() *
                                              svd.matrixV().leftCols(keep).transpose();
            return decompose(ScoreMatrix{truncated}, rank);
        }
    }
    throw ValidationError("unknown baseline kind");
}

}  // namespace hja
