#pragma once

#include <Eigen/Core>
#include <functional>

namespace hja::detail {

struct LbfgsOptions {
    int max_iters = 500;
    double grad_tol = 1e-9;
    /* Extra stop at ||grad|| <= rel_grad_tol * ||grad at x0||; zero disables
     * it.  Inexact block solves use this so their accuracy tightens as the
     * outer loop closes in. */
    double rel_grad_tol = 0.0;
    int memory = 8;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 30;
    /* Accepted decreases below progress_floor * (1 + |f|) twice in a row
     * mean the objective is changing by round-off only. */
    double progress_floor = 1e-14;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/* Limited-memory BFGS with Armijo backtracking.  Exits converged at
 * ||grad|| <= grad_tol; exits unconverged when the line search cannot find
 * a representable decrease (the iterate is then at the numerical floor). */
LbfgsResult minimize(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace hja::detail
