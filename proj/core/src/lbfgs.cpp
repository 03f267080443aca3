#include "lbfgs.hpp"

#include <cmath>
#include <deque>

namespace hja::detail {

namespace {

struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

Eigen::VectorXd two_loop(const std::deque<Pair>& history, const Eigen::VectorXd& grad) {
    Eigen::VectorXd q = -grad;
    if (history.empty()) return q;
    std::vector<double> alpha(history.size());
    for (int h = static_cast<int>(history.size()) - 1; h >= 0; --h) {
        alpha[h] = history[h].rho * history[h].s.dot(q);
        q -= alpha[h] * history[h].y;
    }
    const Pair& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t h = 0; h < history.size(); ++h) {
        const double beta = history[h].rho * history[h].y.dot(q);
        q += (alpha[h] - beta) * history[h].s;
    }
    return q;
}

}  // namespace

LbfgsResult minimize(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options) {
    LbfgsResult result;
    result.x = std::move(x0);
    const auto dim = result.x.size();
    if (dim == 0) {
        Eigen::VectorXd g(0);
        result.value = objective(result.x, g);
        result.converged = true;
        return result;
    }

    Eigen::VectorXd grad(dim);
    result.value = objective(result.x, grad);
    std::deque<Pair> history;
    const double grad_floor =
        std::max(options.grad_tol, options.rel_grad_tol * grad.norm());
    int stagnant = 0;

    for (int iter = 0; iter < options.max_iters; ++iter) {
        result.grad_norm = grad.norm();
        result.iterations = iter;
        if (result.grad_norm <= grad_floor) {
            result.converged = true;
            return result;
        }

        Eigen::VectorXd direction = two_loop(history, grad);
        double slope = grad.dot(direction);
        if (!(slope < 0.0)) {
            direction = -grad;
            slope = -grad.squaredNorm();
        }

        Eigen::VectorXd x_new(dim), grad_new(dim);
        double f_new = 0.0;
        bool accepted = false;
        bool tried_steepest = false;
        while (true) {
            double step = 1.0;
            for (int bt = 0; bt < options.max_backtracks; ++bt) {
                x_new = result.x + step * direction;
                f_new = objective(x_new, grad_new);
                if (std::isfinite(f_new) && f_new <= result.value + options.armijo_c * step * slope) {
                    accepted = true;
                    break;
                }
                step *= options.backtrack;
            }
            if (accepted || tried_steepest) break;
            /* The quasi-Newton direction found no decrease; fall back to
             * steepest descent once before declaring the numerical floor. */
            tried_steepest = true;
            direction = -grad;
            slope = -grad.squaredNorm();
        }
        if (!accepted) return result;
        if (result.value - f_new <= options.progress_floor * (1.0 + std::abs(f_new))) {
            if (++stagnant >= 2) {
                result.x = std::move(x_new);
                result.value = f_new;
                result.grad_norm = grad_new.norm();
                return result;
            }
        } else {
            stagnant = 0;
        }

        Pair pair;
        pair.s = x_new - result.x;
        pair.y = grad_new - grad;
        const double sy = pair.s.dot(pair.y);
        if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (static_cast<int>(history.size()) > options.memory) history.pop_front();
        }
        result.x = std::move(x_new);
        result.value = f_new;
        grad = std::move(grad_new);
    }
    result.grad_norm = grad.norm();
    result.iterations = options.max_iters;
    return result;
}

}  // namespace hja::detail
