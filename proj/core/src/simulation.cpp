#include "hja/simulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "hja/errors.hpp"
#include "hja/likelihood.hpp"
#include "hja/rng.hpp"
#include "parallel.hpp"

namespace hja {

namespace {

Eigen::MatrixXd centered_gaussian(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    m.rowwise() -= m.colwise().mean();
    return m;
}

void project_off(Eigen::MatrixXd& m, const Eigen::VectorXd& direction) {
    const double sq = std::max(direction.squaredNorm(), 1e-300);
    m -= direction * (direction.transpose() * m) / sq;
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

HjaParams generate_truth(const TruthSpec& spec, unsigned long seed) {
    const int n_judges = spec.n_judges;
    const int n_items = spec.n_items;
    const int r = spec.rank;
    if (n_judges < 1 || n_items < 2) throw ValidationError("need at least 1 judge and 2 items");
    if (r < 0 || r > max_rank(n_judges, n_items)) {
        throw RankTooLarge("rank " + std::to_string(r) + " exceeds min(K-1, N-2) = " +
                           std::to_string(max_rank(n_judges, n_items)));
    }
    if (spec.het_scale < 0.0) throw ValidationError("het_scale must be nonnegative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    HjaParams truth;
    truth.mu.resize(n_items);
    for (int i = 0; i < n_items; ++i) truth.mu(i) = normal(rng);
    truth.mu.array() -= truth.mu.mean();

    Eigen::VectorXd weights(n_judges);
    for (int k = 0; k < n_judges; ++k) weights(k) = expo(rng);
    truth.gamma = n_judges * weights / weights.sum();

    if (r == 0) {
        truth.u.resize(n_judges, 0);
        truth.v.resize(n_items, 0);
        return truth;
    }

    Eigen::VectorXd strengths(r);
    for (int m = 0; m < r; ++m) strengths(m) = r - m;

    Eigen::MatrixXd v_raw = centered_gaussian(n_items, r, rng);
    project_off(v_raw, truth.mu);
    truth.v = thin_q(v_raw) * (std::sqrt(static_cast<double>(n_items)) * strengths).asDiagonal();

    Eigen::MatrixXd u_raw = centered_gaussian(n_judges, r, rng);
    truth.u = thin_q(u_raw) * (std::sqrt(static_cast<double>(n_judges)) * strengths).asDiagonal();

    truth.v.rowwise() -= truth.v.colwise().mean();
    project_off(truth.v, truth.mu);
    sign_anchor(truth.u, truth.v);

    const double scale = std::sqrt(spec.het_scale);
    truth.u *= scale;
    truth.v *= scale;
    return truth;
}

std::vector<CountCell> allocate_comparisons(int n_judges, int n_items, long n_cmp,
                                            unsigned long seed) {
    if (n_judges < 1 || n_items < 2) throw ValidationError("need at least 1 judge and 2 items");
    if (n_cmp < 0) throw ValidationError("n_cmp must be nonnegative");
    const long n_cells = static_cast<long>(n_judges) * n_items * (n_items - 1) / 2;
    const long base = n_cmp / n_cells;
    const long rem = n_cmp % n_cells;

    std::vector<long> order(n_cells);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> bumped(n_cells, 0);
    for (long t = 0; t < rem; ++t) bumped[order[t]] = 1;

    std::vector<CountCell> cells;
    cells.reserve(n_cells);
    long at = 0;
    for (int k = 0; k < n_judges; ++k) {
        for (int i = 0; i < n_items; ++i) {
            for (int j = i + 1; j < n_items; ++j, ++at) {
                cells.push_back({k, i, j, static_cast<double>(base + bumped[at]), 0.0});
            }
        }
    }
    return cells;
}

AggregatedCounts sample_outcomes(const HjaParams& truth, const std::vector<CountCell>& allocation,
                                 unsigned long seed) {
    AggregatedCounts counts;
    for (int k = 0; k < truth.num_judges(); ++k) counts.id_map.add_judge("judge_" + std::to_string(k));
    for (int i = 0; i < truth.num_items(); ++i) counts.id_map.add_item("item_" + std::to_string(i));

    std::mt19937_64 rng(seed);
    for (const auto& cell : allocation) {
        const long n = std::lround(cell.count);
        if (n <= 0) continue;
        const double p = predict_prob(truth, cell.judge, cell.item_i, cell.item_j);
        std::binomial_distribution<long> binom(n, p);
        const double wins = static_cast<double>(binom(rng));
        counts.cells.push_back({cell.judge, cell.item_i, cell.item_j, static_cast<double>(n), wins});
        counts.n_total += static_cast<double>(n);
    }
    return counts;
}

namespace {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
    const auto n = x.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x(a) < x(b); });
    Eigen::VectorXd ranks(n);
    Eigen::Index at = 0;
    while (at < n) {
        Eigen::Index run = at;
        while (run + 1 < n && x(order[run + 1]) == x(order[at])) ++run;
        const double avg = 0.5 * (static_cast<double>(at) + static_cast<double>(run)) + 1.0;
        for (Eigen::Index t = at; t <= run; ++t) ranks(order[t]) = avg;
        at = run + 1;
    }
    return ranks;
}

std::vector<int> descending_order(const Eigen::VectorXd& x) {
    std::vector<int> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a) > x(b); });
    return order;
}

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

double spearman_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() < 2) throw ValidationError("need two equal-length vectors");
    const Eigen::VectorXd ra = average_ranks(a);
    const Eigen::VectorXd rb = average_ranks(b);
    const Eigen::VectorXd da = ra.array() - ra.mean();
    const Eigen::VectorXd db = rb.array() - rb.mean();
    const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
    if (denom <= 0.0) return 0.0;
    return da.dot(db) / denom;
}

double ndcg_at_n(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
    if (estimate.size() != truth.size() || truth.size() < 1) {
        throw ValidationError("need two equal-length vectors");
    }
    const auto n = truth.size();
    const std::vector<int> ideal = descending_order(truth);
    Eigen::VectorXd relevance(n);
    for (Eigen::Index pos = 0; pos < n; ++pos) {
        relevance(ideal[pos]) = std::ldexp(1.0, static_cast<int>(n - pos - 1)) - 1.0;
    }
    const std::vector<int> predicted = descending_order(estimate);
    double dcg = 0.0, idcg = 0.0;
    for (Eigen::Index pos = 0; pos < n; ++pos) {
        const double discount = std::log2(static_cast<double>(pos) + 2.0);
        dcg += relevance(predicted[pos]) / discount;
        idcg += relevance(ideal[pos]) / discount;
    }
    return dcg / idcg;
}

MetricReport compute_metrics(const HjaParams& estimate, const HjaParams& truth,
                             const std::vector<Interval>* score_intervals) {
    if (estimate.num_judges() != truth.num_judges() || estimate.num_items() != truth.num_items()) {
        throw ValidationError("estimate and truth dimensions disagree");
    }
    const int n_judges = truth.num_judges();
    const int n_items = truth.num_items();
    const Eigen::MatrixXd s_est = compose(estimate).s;
    const Eigen::MatrixXd s_true = compose(truth).s;

    MetricReport report;
    report.mse = (s_est - s_true).squaredNorm() / (n_judges * n_items);
    report.spearman = spearman_correlation(estimate.mu, truth.mu);
    report.ndcg = ndcg_at_n(estimate.mu, truth.mu);

    if (score_intervals) {
        if (score_intervals->size() != static_cast<std::size_t>(n_judges * n_items)) {
            throw ValidationError("expected one score interval per judge-item entry");
        }
        int covered = 0;
        for (int k = 0; k < n_judges; ++k) {
            for (int i = 0; i < n_items; ++i) {
                const Interval& ci = (*score_intervals)[k * n_items + i];
                if (s_true(k, i) >= ci.lower && s_true(k, i) <= ci.upper) ++covered;
            }
        }
        report.coverage = static_cast<double>(covered) / (n_judges * n_items);
    }

    int agree = 0, total = 0;
    for (int k = 0; k < n_judges; ++k) {
        for (int i = 0; i < n_items; ++i) {
            for (int j = i + 1; j < n_items; ++j, ++total) {
                if (sign_of(s_est(k, i) - s_est(k, j)) == sign_of(s_true(k, i) - s_true(k, j))) {
                    ++agree;
                }
            }
        }
    }
    report.sign_accuracy = static_cast<double>(agree) / total;
    return report;
}

namespace {

std::vector<Interval> pooled_interval_grid(const AggregatedCounts& counts, double level,
                                           double inner_tol) {
    AggregatedCounts pooled = pool_judges(counts);
    HjaParams single;
    single.gamma = Eigen::VectorXd::Ones(1);
    single.mu = fit_pooled_btl(counts, inner_tol);
    single.mu.array() -= single.mu.mean();
    single.u.resize(1, 0);
    single.v.resize(pooled.num_items(), 0);
    const FisherInfo info = fisher_info(single, pooled);
    const TangentCovariance cov = tangent_covariance(info, tangent_basis(single));
    std::vector<Interval> row;
    row.reserve(pooled.num_items());
    for (int i = 0; i < pooled.num_items(); ++i) {
        row.push_back(target_ci(single, cov, {TargetKind::score_entry, 0, i, -1}, level));
    }
    std::vector<Interval> grid;
    grid.reserve(static_cast<std::size_t>(counts.num_judges()) * pooled.num_items());
    for (int k = 0; k < counts.num_judges(); ++k) {
        grid.insert(grid.end(), row.begin(), row.end());
    }
    return grid;
}

struct TaskOutcome {
    std::array<std::optional<MetricReport>, 4> by_method;
};

constexpr std::array<const char*, 4> kMethods = {"hja", "ja", "btl", "btl_svd"};
constexpr std::array<const char*, 5> kMetrics = {"mse", "spearman", "ndcg", "coverage",
                                                 "sign_accuracy"};

double metric_value(const MetricReport& r, const std::string& name) {
    if (name == "mse") return r.mse;
    if (name == "spearman") return r.spearman;
    if (name == "ndcg") return r.ndcg;
    if (name == "coverage") return r.coverage.value();
    return r.sign_accuracy;
}

}  // namespace

std::vector<StudyRow> run_recovery_study(const StudyConfig& config) {
    if (config.grid.empty()) throw ValidationError("empty study grid");
    if (config.n_seeds < 1) throw ValidationError("need at least one seed");
    const int n_grid = static_cast<int>(config.grid.size());
    const int fit_rank = config.truth.rank;

    std::vector<TaskOutcome> outcomes(static_cast<std::size_t>(n_grid) * config.n_seeds);
    detail::parallel_for(n_grid * config.n_seeds, config.threads, [&](int task) {
        const int g = task / config.n_seeds;
        const int rep = task % config.n_seeds;
        TaskOutcome& slot = outcomes[task];
        try {
            TruthSpec spec = config.truth;
            long n_cmp = config.n_cmp;
            if (config.grid_kind == StudyGrid::n_cmp) {
                n_cmp = static_cast<long>(config.grid[g]);
            } else {
                spec.het_scale = config.grid[g];
            }
            const HjaParams truth = generate_truth(spec, derive_seed(config.seed, g, rep, 1));
            const auto allocation = allocate_comparisons(spec.n_judges, spec.n_items, n_cmp,
                                                         derive_seed(config.seed, g, rep, 2));
            const AggregatedCounts counts =
                sample_outcomes(truth, allocation, derive_seed(config.seed, g, rep, 3));

            for (int m = 0; m < 4; ++m) {
                try {
                    HjaParams params;
                    std::vector<Interval> intervals;
                    bool have_intervals = false;
                    SolverConfig solver = config.solver;
                    if (m == 0) {
                        solver.rank = fit_rank;
                        params = fit(counts, solver).params;
                    } else if (m == 1) {
                        params = fit_baseline(counts, BaselineKind::sensitivity_only, 0, solver);
                    } else if (m == 2) {
                        params = fit_baseline(counts, BaselineKind::pooled, 0, solver);
                    } else {
                        params = fit_baseline(counts, BaselineKind::btl_svd, fit_rank, solver);
                    }
                    if (m == 0 || m == 1) {
                        try {
                            intervals = score_entry_intervals(params, counts, config.level);
                            have_intervals = true;
                        } catch (const std::runtime_error&) {
                        }
                    } else if (m == 2) {
                        try {
                            intervals = pooled_interval_grid(counts, config.level, solver.inner_tol);
                            have_intervals = true;
                        } catch (const std::runtime_error&) {
                        }
                    }
                    slot.by_method[m] =
                        compute_metrics(params, truth, have_intervals ? &intervals : nullptr);
                } catch (const std::runtime_error&) {
                }
            }
        } catch (const std::runtime_error&) {
        }
    });

    std::vector<StudyRow> rows;
    rows.reserve(static_cast<std::size_t>(n_grid) * 4);
    for (int g = 0; g < n_grid; ++g) {
        for (int m = 0; m < 4; ++m) {
            StudyRow row;
            row.method = kMethods[m];
            row.grid_value = config.grid[g];
            for (const char* metric : kMetrics) {
                std::vector<double> values;
                for (int rep = 0; rep < config.n_seeds; ++rep) {
                    const auto& outcome = outcomes[g * config.n_seeds + rep].by_method[m];
                    if (!outcome) continue;
                    if (std::string(metric) == "coverage" && !outcome->coverage) continue;
                    values.push_back(metric_value(*outcome, metric));
                }
                if (values.empty()) continue;
                StudyStat stat;
                stat.n_ok = static_cast<int>(values.size());
                for (double v : values) stat.mean += v;
                stat.mean /= stat.n_ok;
                if (stat.n_ok > 1) {
                    double ss = 0.0;
                    for (double v : values) ss += (v - stat.mean) * (v - stat.mean);
                    stat.err95 = 1.96 * std::sqrt(ss / (stat.n_ok - 1)) / std::sqrt(stat.n_ok);
                }
                row.metrics[metric] = stat;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
    std::ostringstream out;
    out << "method,grid_value,metric,mean,err95,n_ok\n";
    out << std::setprecision(12);
    for (const auto& row : rows) {
        for (const char* metric : kMetrics) {
            auto it = row.metrics.find(metric);
            if (it == row.metrics.end()) continue;
            out << row.method << ',' << row.grid_value << ',' << metric << ',' << it->second.mean
                << ',' << it->second.err95 << ',' << it->second.n_ok << '\n';
        }
    }
    return out.str();
}

}  // namespace hja
