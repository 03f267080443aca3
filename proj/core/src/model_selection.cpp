#include "hja/model_selection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hja/errors.hpp"
#include "hja/likelihood.hpp"

namespace hja {

int model_dimension(int n_judges, int n_items, int rank) {
    return rank * (n_judges + n_items - rank - 3);
}

double bic(const FitResult& fit, const AggregatedCounts& counts) {
    if (counts.n_total <= 0.0) throw ValidationError("no observations");
    const int d = model_dimension(counts.num_judges(), counts.num_items(), fit.params.rank());
    return 2.0 * fit.final_nll + d * std::log(counts.n_total);
}

namespace {

std::vector<std::vector<std::size_t>> deal_folds(std::size_t n_records, int folds,
                                                 unsigned long seed) {
    std::vector<std::size_t> order(n_records);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t t = 0; t < n_records; ++t) out[t % folds].push_back(order[t]);
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

}  // namespace

RankSelection select_rank(const std::vector<ComparisonRecord>& records, RankMethod method, int r_max,
                          int folds, unsigned long seed, const SolverConfig& config) {
    if (records.empty()) throw ValidationError("no records for rank selection");
    RankSelection out;
    out.method = method;

    const AggregatedCounts all = aggregate(records);
    const int bound = max_rank(all.num_judges(), all.num_items());
    if (r_max < 0 || r_max > bound) {
        throw RankTooLarge("r_max " + std::to_string(r_max) + " exceeds min(K-1, N-2) = " +
                           std::to_string(bound));
    }

    if (method == RankMethod::bic) {
        for (int r = 0; r <= r_max; ++r) {
            SolverConfig c = config;
            c.rank = r;
            try {
                FitResult fit_r = fit(all, c);
                out.per_rank_scores[r] = bic(fit_r, all);
            } catch (const std::runtime_error& err) {
                out.warnings.push_back("rank " + std::to_string(r) + " fit failed: " + err.what());
            }
        }
    } else {
        if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
        if (records.size() < static_cast<std::size_t>(folds)) {
            throw ValidationError("fewer records than folds");
        }
        const auto fold_indices = deal_folds(records.size(), folds, seed);
        std::map<int, std::pair<double, int>> score_acc;
        for (int f = 0; f < folds; ++f) {
            std::vector<char> in_valid(records.size(), 0);
            for (auto idx : fold_indices[f]) in_valid[idx] = 1;
            std::vector<ComparisonRecord> train, valid;
            for (std::size_t t = 0; t < records.size(); ++t) {
                (in_valid[t] ? valid : train).push_back(records[t]);
            }
            if (train.empty() || valid.empty()) {
                out.warnings.push_back("fold " + std::to_string(f) + " empty, skipped");
                continue;
            }
            AggregatedCounts train_counts;
            try {
                train_counts = aggregate(train);
            } catch (const std::runtime_error& err) {
                out.warnings.push_back("fold " + std::to_string(f) + " skipped: " + err.what());
                continue;
            }
            const GraphReport graph = check_connectivity(train_counts);
            const bool ok = config.allow_disconnected
                                ? graph.pooled_connected
                                : graph.pooled_connected && graph.all_judges_connected();
            if (!ok) {
                out.warnings.push_back("fold " + std::to_string(f) +
                                       " skipped: training graph disconnected (" +
                                       describe_components(graph, train_counts.id_map) + ")");
                continue;
            }
            auto [valid_counts, dropped] = aggregate_onto(valid, train_counts.id_map);
            if (dropped.dropped > 0) {
                out.warnings.push_back("fold " + std::to_string(f) + ": " +
                                       std::to_string(dropped.dropped) +
                                       " validation records had labels unseen in training");
            }
            if (valid_counts.n_total <= 0.0) {
                out.warnings.push_back("fold " + std::to_string(f) +
                                       " skipped: no scoreable validation records");
                continue;
            }
            const int fold_bound =
                std::min(r_max, max_rank(train_counts.num_judges(), train_counts.num_items()));
            for (int r = 0; r <= fold_bound; ++r) {
                SolverConfig c = config;
                c.rank = r;
                try {
                    FitResult fit_r = fit(train_counts, c);
                    const double score = nll(fit_r.params, valid_counts) / valid_counts.n_total;
                    auto& acc = score_acc.try_emplace(r, 0.0, 0).first->second;
                    acc.first += score;
                    acc.second += 1;
                } catch (const std::runtime_error& err) {
                    out.warnings.push_back("fold " + std::to_string(f) + " rank " +
                                           std::to_string(r) + " fit failed: " + err.what());
                }
            }
        }
        for (const auto& [r, acc] : score_acc) {
            out.per_rank_scores[r] = acc.first / acc.second;
        }
    }

    if (out.per_rank_scores.empty()) {
        throw SelectionError("no candidate rank produced a usable score");
    }
    out.chosen_rank = out.per_rank_scores.begin()->first;
    double best = out.per_rank_scores.begin()->second;
    for (const auto& [r, score] : out.per_rank_scores) {
        if (score < best) {
            best = score;
            out.chosen_rank = r;
        }
    }
    return out;
}

Eigen::VectorXd spectral_scree(const AggregatedCounts& counts, const SolverConfig& config) {
    SolverConfig rank0 = config;
    rank0.rank = 0;
    const HjaParams base = fit(counts, rank0).params;
    const GraphReport graph = check_connectivity(counts);

    Eigen::MatrixXd judgewise(counts.num_judges(), counts.num_items());
    for (int k = 0; k < counts.num_judges(); ++k) {
        if (graph.per_judge_connected[k]) {
            judgewise.row(k) = fit_judgewise_btl(counts, k, config.inner_tol);
        } else if (config.allow_disconnected) {
            judgewise.row(k) = base.gamma(k) * base.mu;
        } else {
            throw ConnectivityError(describe_components(graph, counts.id_map));
        }
    }
    const Eigen::MatrixXd residual = judgewise - base.gamma * base.mu.transpose();
    return residual.bdcSvd().singularValues();
}

}  // namespace hja
