#pragma once

#include <Eigen/Core>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"

namespace hja {

/* log(1 + exp(x)) without overflow anywhere on the real line. */
double softplus(double x);

/* Logistic function clamped to the open interval (0, 1) so downstream
 * logs and variance weights stay finite. */
double sigmoid(double x);

/* Score gap eta the judge applies to the ordered pair (i, j). */
double linear_predictor(const HjaParams& params, int judge, int item_i, int item_j);

/* Win probability for item_i over item_j under the given judge. */
double predict_prob(const HjaParams& params, int judge, int item_i, int item_j);

/* Gradient container mirroring the parameter blocks. */
struct ParamGrad {
    Eigen::VectorXd gamma;
    Eigen::VectorXd mu;
    Eigen::MatrixXd u;
    Eigen::MatrixXd v;
};

/* Binomial negative log-likelihood of the aggregated counts, accumulated
 * over cells in their sorted order so repeated evaluation is bitwise
 * reproducible. */
double nll(const HjaParams& params, const AggregatedCounts& counts);

/* Likelihood value and, when grad is non-null, its gradient in one pass.
 * Each cell touches only gamma_k, mu_i, mu_j and the k-th/i-th/j-th factor
 * rows, 3 + 3r scalar slots in total. */
double nll_with_gradient(const HjaParams& params, const AggregatedCounts& counts, ParamGrad* grad);

ParamGrad nll_gradient(const HjaParams& params, const AggregatedCounts& counts);

}  // namespace hja
