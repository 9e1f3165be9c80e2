#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "spatconf/covariance.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/locations.hpp"

namespace spatconf {

enum class FitMethod { OLS, GLS, ML, REML, RegSpline, PenSpline };

[[nodiscard]] std::string to_string(FitMethod method);
[[nodiscard]] FitMethod fit_method_from_string(const std::string& name);

struct VarianceComponents {
    double sigma_g2 = 0.0;
    double tau2 = 0.0;
    double theta_g = 0.0;
};

struct FitResult {
    FitMethod method = FitMethod::OLS;
    double beta0_hat = 0.0;
    double betax_hat = 0.0;
    double se_betax = 0.0;
    std::optional<VarianceComponents> components;
    std::optional<double> edf;
    std::optional<double> loglik;
    std::optional<double> lambda;
    bool converged = true;
    // Smoothing-parameter search ended on the edge of its range.
    bool at_boundary = false;
};

// One CSV row per fit; empty fields for absent optionals.
void write_fit_csv_header(std::ostream& os);
void write_fit_csv_row(std::ostream& os, const FitResult& fit);

// OLS of Y on [1 X]. Standard error from the naive formula
// sigma_hat^2 [(X'X)^{-1}]_22 with sigma_hat^2 = RSS / (n - 2).
[[nodiscard]] FitResult ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// True variance of the OLS slope under residual covariance Sigma:
// [(X'X)^{-1} X' Sigma X (X'X)^{-1}]_22.
[[nodiscard]] double ols_true_variance(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma);

// GLS with known covariance, via Cholesky of Sigma (jitter policy applies).
// se_betax = sqrt([(X' Sigma^{-1} X)^{-1}]_22).
[[nodiscard]] FitResult gls_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& sigma);
[[nodiscard]] FitResult gls_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SpdFactor& sigma);

// [(X' Sigma^{-1} X)^{-1}]_22 for a factored Sigma.
[[nodiscard]] double gls_slope_variance(const Eigen::VectorXd& x, const SpdFactor& sigma);

// ---------------------------------------------------------------------------
// Mixed model / universal kriging:  Y ~ N(b0 + bx X, sigma_g2 R(theta_g) + tau2 I)

enum class Criterion { ML, REML };

struct MixedParams {
    double sigma_g2 = 0.0;
    double tau2 = 1.0;
    double theta_g = 0.5;
};

// Gaussian log-likelihood of Y at explicit (sigma_g2, tau2, theta_g) and
// explicit coefficients (b0, bx).
[[nodiscard]] double mixed_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LocationSet& locs,
                                  double nu, const MixedParams& params, double beta0, double betax);

// Log-likelihood with the coefficients profiled out by GLS. For REML this is
//   -1/2 [(n-2) log 2pi + log|Sigma| + log|X' Sigma^{-1} X| + r' Sigma^{-1} r],
// i.e. the ML value at the GLS coefficients minus 1/2 log|X' Sigma^{-1} X|
// plus log 2pi.
[[nodiscard]] double mixed_profile_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          const LocationSet& locs, double nu, const MixedParams& params,
                                          Criterion criterion);

struct MixedControl {
    double theta_min = 0.01;
    double theta_max = 3.0;
    int restarts = 3;
    int max_evals = 400;   // per restart
    double ftol = 1e-8;
};

// Maximises the (restricted) likelihood over (log theta_g, logit p_g) with
// p_g = sigma_g2 / (sigma_g2 + tau2); the total variance and the
// coefficients are profiled out in closed form. Nelder-Mead with restarts
// from spread starting points; converged reports whether the best restart
// met the tolerance within its evaluation budget.
[[nodiscard]] FitResult mixed_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LocationSet& locs,
                                  double nu_fit, Criterion criterion, const MixedControl& control = {});

} // namespace spatconf
