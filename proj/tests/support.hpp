#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"
#include "hja/likelihood.hpp"

namespace testsupport {

inline Eigen::VectorXd centered_normal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = normal(rng);
    x.array() -= x.mean();
    return x;
}

/* Random member of the canonical parameter set: centered nonzero consensus,
 * affine-anchored sensitivities, orthonormalized factor pair with strictly
 * decreasing planted strengths and the column sign convention applied. */
inline hja::HjaParams random_canonical(int n_judges, int n_items, int rank, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    hja::HjaParams params;
    do {
        params.mu = centered_normal(n_items, rng);
    } while (params.mu.norm() < 0.3);
    params.gamma = centered_normal(n_judges, rng) * 0.4;
    params.gamma.array() += 1.0;

    Eigen::MatrixXd raw_v(n_items, rank), raw_u(n_judges, rank);
    for (int c = 0; c < rank; ++c) {
        raw_v.col(c) = centered_normal(n_items, rng);
        raw_v.col(c) -= params.mu * (params.mu.dot(raw_v.col(c)) / params.mu.squaredNorm());
        raw_u.col(c) = centered_normal(n_judges, rng);
    }
    params.v.resize(n_items, rank);
    params.u.resize(n_judges, rank);
    if (rank > 0) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr_v(raw_v);
        Eigen::MatrixXd q_v = qr_v.householderQ() * Eigen::MatrixXd::Identity(n_items, rank);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr_u(raw_u);
        Eigen::MatrixXd q_u = qr_u.householderQ() * Eigen::MatrixXd::Identity(n_judges, rank);
        params.v = std::sqrt(static_cast<double>(n_items)) * q_v;
        Eigen::VectorXd strengths(rank);
        for (int c = 0; c < rank; ++c) strengths(c) = std::sqrt(0.8 * (rank - c));
        params.u = std::sqrt(static_cast<double>(n_judges)) * q_u * strengths.asDiagonal();
        hja::sign_anchor(params.u, params.v);
    }
    return params;
}

inline hja::AggregatedCounts make_counts(int n_judges, int n_items,
                                         const std::vector<hja::CountCell>& cells) {
    hja::AggregatedCounts counts;
    for (int k = 0; k < n_judges; ++k) counts.id_map.add_judge("judge_" + std::to_string(k));
    for (int i = 0; i < n_items; ++i) counts.id_map.add_item("item_" + std::to_string(i));
    counts.cells = cells;
    std::sort(counts.cells.begin(), counts.cells.end(), [](const auto& a, const auto& b) {
        return std::tie(a.judge, a.item_i, a.item_j) < std::tie(b.judge, b.item_i, b.item_j);
    });
    for (const auto& cell : counts.cells) counts.n_total += cell.count;
    return counts;
}

/* Dense random design with integer binomial-looking wins. */
inline hja::AggregatedCounts random_counts(int n_judges, int n_items, std::mt19937_64& rng,
                                           int n_min = 3, int n_max = 12) {
    std::uniform_int_distribution<int> count_dist(n_min, n_max);
    std::vector<hja::CountCell> cells;
    for (int k = 0; k < n_judges; ++k)
        for (int i = 0; i < n_items; ++i)
            for (int j = i + 1; j < n_items; ++j) {
                const int n = count_dist(rng);
                std::uniform_int_distribution<int> win_dist(0, n);
                cells.push_back({k, i, j, static_cast<double>(n), static_cast<double>(win_dist(rng))});
            }
    return make_counts(n_judges, n_items, cells);
}

inline std::vector<hja::ComparisonRecord> expand_records(const hja::AggregatedCounts& counts) {
    std::vector<hja::ComparisonRecord> records;
    for (const auto& cell : counts.cells) {
        const std::string& judge = counts.id_map.judges[cell.judge];
        const std::string& a = counts.id_map.items[cell.item_i];
        const std::string& b = counts.id_map.items[cell.item_j];
        const int wins = static_cast<int>(std::floor(cell.wins));
        const bool half = cell.wins - wins > 0.25;
        const int total = static_cast<int>(cell.count);
        for (int t = 0; t < total; ++t) {
            double outcome = t < wins ? 1.0 : 0.0;
            if (half && t == wins) outcome = 0.5;
            records.push_back({judge, a, b, outcome});
        }
    }
    return records;
}

/* Ambient order gamma, mu, then u and v column-major, matching the library. */
inline Eigen::VectorXd flatten(const hja::HjaParams& params) {
    const int K = params.num_judges(), N = params.num_items(), r = params.rank();
    Eigen::VectorXd x(K + N + r * (K + N));
    x.head(K) = params.gamma;
    x.segment(K, N) = params.mu;
    int at = K + N;
    for (int c = 0; c < r; ++c, at += K) x.segment(at, K) = params.u.col(c);
    for (int c = 0; c < r; ++c, at += N) x.segment(at, N) = params.v.col(c);
    return x;
}

inline hja::HjaParams unflatten(const Eigen::VectorXd& x, int n_judges, int n_items, int rank) {
    hja::HjaParams params;
    params.gamma = x.head(n_judges);
    params.mu = x.segment(n_judges, n_items);
    params.u.resize(n_judges, rank);
    params.v.resize(n_items, rank);
    int at = n_judges + n_items;
    for (int c = 0; c < rank; ++c, at += n_judges) params.u.col(c) = x.segment(at, n_judges);
    for (int c = 0; c < rank; ++c, at += n_items) params.v.col(c) = x.segment(at, n_items);
    return params;
}

inline Eigen::VectorXd fd_gradient(const hja::HjaParams& params, const hja::AggregatedCounts& counts,
                                   double step = 1e-5) {
    const Eigen::VectorXd x0 = flatten(params);
    Eigen::VectorXd grad(x0.size());
    for (int d = 0; d < x0.size(); ++d) {
        Eigen::VectorXd x = x0;
        x(d) = x0(d) + step;
        const double up = hja::nll(unflatten(x, params.num_judges(), params.num_items(), params.rank()), counts);
        x(d) = x0(d) - step;
        const double down =
            hja::nll(unflatten(x, params.num_judges(), params.num_items(), params.rank()), counts);
        grad(d) = (up - down) / (2.0 * step);
    }
    return grad;
}

/* Ambient gradient of the score gap eta_kij assembled from the closed-form
 * entries, independent of the library's sparse accumulation. */
inline Eigen::VectorXd dense_eta_grad(const hja::HjaParams& params, int k, int i, int j) {
    const int K = params.num_judges(), N = params.num_items(), r = params.rank();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(K + N + r * (K + N));
    g(k) = params.mu(i) - params.mu(j);
    g(K + i) = params.gamma(k);
    g(K + j) = -params.gamma(k);
    for (int c = 0; c < r; ++c) {
        g(K + N + c * K + k) = params.v(i, c) - params.v(j, c);
        g(K + N + r * K + c * N + i) = params.u(k, c);
        g(K + N + r * K + c * N + j) = -params.u(k, c);
    }
    return g;
}

/* Independent damped-Newton solver for the plain paired-comparison model on
 * counts pooled over judges; returns centered scores. */
inline Eigen::VectorXd newton_btl(const hja::AggregatedCounts& counts, double tol = 1e-12) {
    const int N = counts.num_items();
    struct Edge {
        int i, j;
        double n, y;
    };
    std::vector<Edge> edges;
    {
        std::map<std::pair<int, int>, std::pair<double, double>> pooled;
        for (const auto& cell : counts.cells) {
            auto& slot = pooled[{cell.item_i, cell.item_j}];
            slot.first += cell.count;
            slot.second += cell.wins;
        }
        for (const auto& [key, val] : pooled) edges.push_back({key.first, key.second, val.first, val.second});
    }
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
    auto objective = [&](const Eigen::VectorXd& scores) {
        double total = 0.0;
        for (const auto& e : edges) {
            const double eta = scores(e.i) - scores(e.j);
            total += -e.y * eta + e.n * hja::softplus(eta);
        }
        return total;
    };
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(N);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(N, N);
        for (const auto& e : edges) {
            const double p = hja::sigmoid(s(e.i) - s(e.j));
            const double g = e.n * p - e.y;
            const double w = e.n * p * (1.0 - p);
            grad(e.i) += g;
            grad(e.j) -= g;
            hess(e.i, e.i) += w;
            hess(e.j, e.j) += w;
            hess(e.i, e.j) -= w;
            hess(e.j, e.i) -= w;
        }
        if (grad.norm() < tol) break;
        hess.diagonal().array() += 1e-10;
        Eigen::VectorXd direction = -hess.ldlt().solve(grad);
        direction.array() -= direction.mean();
        double step = 1.0;
        const double base = objective(s);
        while (step > 1e-12 && objective(s + step * direction) > base - 1e-4 * step * std::abs(grad.dot(direction)))
            step *= 0.5;
        s += step * direction;
        s.array() -= s.mean();
    }
    return s;
}

/* Unnormalized observed information of the pooled model on the free chart
 * that drops the last score coordinate. */
inline Eigen::MatrixXd btl_free_information(const Eigen::VectorXd& scores,
                                            const hja::AggregatedCounts& counts) {
    const int N = counts.num_items();
    Eigen::MatrixXd ambient = Eigen::MatrixXd::Zero(N, N);
    for (const auto& cell : counts.cells) {
        const double p = hja::sigmoid(scores(cell.item_i) - scores(cell.item_j));
        const double w = cell.count * p * (1.0 - p);
        ambient(cell.item_i, cell.item_i) += w;
        ambient(cell.item_j, cell.item_j) += w;
        ambient(cell.item_i, cell.item_j) -= w;
        ambient(cell.item_j, cell.item_i) -= w;
    }
    /* Chart s_d = s_d for d < N-1, s_{N-1} = -sum of the others. */
    Eigen::MatrixXd chart = Eigen::MatrixXd::Zero(N, N - 1);
    chart.topLeftCorner(N - 1, N - 1).setIdentity();
    chart.row(N - 1).setConstant(-1.0);
    return chart.transpose() * ambient * chart;
}

/* Wald standard error of scores(i) - scores(j) under the pooled model. */
inline double btl_contrast_se(const Eigen::VectorXd& scores, const hja::AggregatedCounts& counts,
                              int i, int j) {
    const int N = counts.num_items();
    Eigen::VectorXd ambient_grad = Eigen::VectorXd::Zero(N);
    ambient_grad(i) += 1.0;
    ambient_grad(j) -= 1.0;
    Eigen::VectorXd reduced = ambient_grad.head(N - 1).array() - ambient_grad(N - 1);
    const Eigen::MatrixXd info = btl_free_information(scores, counts);
    return std::sqrt(reduced.dot(info.ldlt().solve(reduced)));
}

/* Brute-force two-parameter grid search for a three-item instance of one
 * judge, refined around the best cell. */
inline Eigen::VectorXd grid_btl_three_items(const hja::AggregatedCounts& counts, int judge) {
    auto objective = [&](double s0, double s1) {
        double total = 0.0;
        const double s2 = -s0 - s1;
        const double scores[3] = {s0, s1, s2};
        for (const auto& cell : counts.cells) {
            if (cell.judge != judge) continue;
            const double eta = scores[cell.item_i] - scores[cell.item_j];
            total += -cell.wins * eta + cell.count * hja::softplus(eta);
        }
        return total;
    };
    double best0 = 0.0, best1 = 0.0, best = objective(0.0, 0.0);
    double radius = 6.0, spacing = 0.1;
    for (int pass = 0; pass < 6; ++pass) {
        const double c0 = best0, c1 = best1;
        for (double a = c0 - radius; a <= c0 + radius; a += spacing)
            for (double b = c1 - radius; b <= c1 + radius; b += spacing) {
                const double value = objective(a, b);
                if (value < best) {
                    best = value;
                    best0 = a;
                    best1 = b;
                }
            }
        radius = spacing * 2;
        spacing /= 10.0;
    }
    Eigen::VectorXd s(3);
    s << best0, best1, -best0 - best1;
    return s;
}

inline std::vector<double> naive_average_ranks(const Eigen::VectorXd& scores) {
    const int n = static_cast<int>(scores.size());
    std::vector<double> ranks(n, 0.0);
    for (int i = 0; i < n; ++i) {
        int above = 0, equal = 0;
        for (int j = 0; j < n; ++j) {
            if (scores(j) > scores(i)) ++above;
            if (scores(j) == scores(i)) ++equal;
        }
        ranks[i] = above + (equal + 1) / 2.0;
    }
    return ranks;
}

inline double naive_spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const auto ra = naive_average_ranks(a), rb = naive_average_ranks(b);
    const int n = static_cast<int>(ra.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (int i = 0; i < n; ++i) {
        cov += (ra[i] - mean_a) * (rb[i] - mean_b);
        var_a += (ra[i] - mean_a) * (ra[i] - mean_a);
        var_b += (rb[i] - mean_b) * (rb[i] - mean_b);
    }
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

inline double naive_ndcg(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
    const int n = static_cast<int>(truth.size());
    const auto true_ranks = naive_average_ranks(truth);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return estimate(a) > estimate(b); });
    std::vector<int> ideal(n);
    std::iota(ideal.begin(), ideal.end(), 0);
    std::stable_sort(ideal.begin(), ideal.end(), [&](int a, int b) { return truth(a) > truth(b); });
    auto relevance = [&](int item) { return std::pow(2.0, n - true_ranks[item]) - 1.0; };
    double dcg = 0.0, idcg = 0.0;
    for (int pos = 0; pos < n; ++pos) {
        dcg += relevance(order[pos]) / std::log2(pos + 2.0);
        idcg += relevance(ideal[pos]) / std::log2(pos + 2.0);
    }
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

inline double naive_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    return (estimate - truth).squaredNorm() / (truth.rows() * truth.cols());
}

inline double naive_sign_accuracy(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    int hits = 0, total = 0;
    for (int k = 0; k < truth.rows(); ++k)
        for (int i = 0; i < truth.cols(); ++i)
            for (int j = i + 1; j < truth.cols(); ++j) {
                const double a = estimate(k, i) - estimate(k, j);
                const double b = truth(k, i) - truth(k, j);
                const int sa = a > 0 ? 1 : (a < 0 ? -1 : 0);
                const int sb = b > 0 ? 1 : (b < 0 ? -1 : 0);
                hits += sa == sb;
                ++total;
            }
    return static_cast<double>(hits) / total;
}

}  // namespace testsupport
