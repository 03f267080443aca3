#include "hja/likelihood.hpp"

#include <cmath>
#include <limits>

#include "hja/errors.hpp"

namespace hja {

namespace {

void require_match(const HjaParams& params, const AggregatedCounts& counts) {
    if (params.num_judges() != counts.num_judges() || params.num_items() != counts.num_items()) {
        throw ValidationError("parameter dimensions disagree with the aggregated counts");
    }
}

void require_indices(const HjaParams& params, int judge, int item_i, int item_j) {
    if (judge < 0 || judge >= params.num_judges() || item_i < 0 || item_i >= params.num_items() ||
        item_j < 0 || item_j >= params.num_items()) {
        throw ValidationError("judge or item index out of range");
    }
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    double p;
    if (x >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        p = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::min(std::max(p, lo), hi);
}

double linear_predictor(const HjaParams& params, int judge, int item_i, int item_j) {
    require_indices(params, judge, item_i, item_j);
    double eta = params.gamma(judge) * (params.mu(item_i) - params.mu(item_j));
    if (params.rank() > 0) {
        eta += params.u.row(judge).dot(params.v.row(item_i) - params.v.row(item_j));
    }
    return eta;
}

double predict_prob(const HjaParams& params, int judge, int item_i, int item_j) {
    return sigmoid(linear_predictor(params, judge, item_i, item_j));
}

double nll_with_gradient(const HjaParams& params, const AggregatedCounts& counts, ParamGrad* grad) {
    require_match(params, counts);
    const int r = params.rank();
    if (grad) {
        grad->gamma = Eigen::VectorXd::Zero(params.num_judges());
        grad->mu = Eigen::VectorXd::Zero(params.num_items());
        grad->u = Eigen::MatrixXd::Zero(params.num_judges(), r);
        grad->v = Eigen::MatrixXd::Zero(params.num_items(), r);
    }
    double total = 0.0;
    for (const auto& cell : counts.cells) {
        const int k = cell.judge;
        const int i = cell.item_i;
        const int j = cell.item_j;
        const double mu_gap = params.mu(i) - params.mu(j);
        double eta = params.gamma(k) * mu_gap;
        if (r > 0) eta += params.u.row(k).dot(params.v.row(i) - params.v.row(j));
        const double y_bar = cell.wins / cell.count;
        total += cell.count * (-y_bar * eta + softplus(eta));
        if (grad) {
            const double d = cell.count * (sigmoid(eta) - y_bar);
            grad->gamma(k) += d * mu_gap;
            grad->mu(i) += d * params.gamma(k);
            grad->mu(j) -= d * params.gamma(k);
            for (int m = 0; m < r; ++m) {
                grad->u(k, m) += d * (params.v(i, m) - params.v(j, m));
                grad->v(i, m) += d * params.u(k, m);
                grad->v(j, m) -= d * params.u(k, m);
            }
        }
    }
    return total;
}

double nll(const HjaParams& params, const AggregatedCounts& counts) {
    return nll_with_gradient(params, counts, nullptr);
}

ParamGrad nll_gradient(const HjaParams& params, const AggregatedCounts& counts) {
    ParamGrad grad;
    nll_with_gradient(params, counts, &grad);
    return grad;
}

}  // namespace hja
