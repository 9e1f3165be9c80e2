#pragma once

#include <functional>

#include <Eigen/Dense>

namespace spatconf {

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int evals = 0;
    bool converged = false;
};

// Derivative-free minimisation on a box. Trial points are clamped into
// [lower, upper]; stops when the spread of simplex values falls below ftol
// (absolute, plus relative to |f|) or max_evals is reached.
[[nodiscard]] NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                           int max_evals, double ftol);

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
};

// Golden-section search for a minimum of f on [a, b].
[[nodiscard]] ScalarMinimum golden_section(const std::function<double(double)>& f, double a, double b,
                                           double xtol = 1e-8, int max_iter = 200);

// Root of a monotone function on [a, b] by bisection; f(a) and f(b) must
// bracket zero.
[[nodiscard]] double bisect(const std::function<double(double)>& f, double a, double b, double xtol = 1e-12,
                            int max_iter = 300);

} // namespace spatconf
