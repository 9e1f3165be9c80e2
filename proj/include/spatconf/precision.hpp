#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "spatconf/fields.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/locations.hpp"

namespace spatconf {

// Exposure X ~ N(mu_x, d_x^2 sigma_x2 R(theta_x)) and residual covariance
// Sigma = tau2 I + d_g^2 sigma_g2 R(theta_g) with p_g = sigma_g2 / (sigma_g2 + tau2).
// Everything below is written in terms of the scaled residual correlation
//   Sigma~ = (1 - p_g) I + p_g d_g^2 R(theta_g),  Sigma = (sigma_g2 + tau2) Sigma~.
struct PrecisionScenario {
    double theta_x = 0.5;
    double theta_g = 0.5;
    double p_g = 0.5;
    double sigma_x2 = 1.0;
    double total_resid = 1.0;  // sigma_g2 + tau2
    double nu = 2.0;
    void validate() const;
};

struct PrecisionCalibration {
    double d_x = 1.0;
    double d_g = 1.0;
    // When set, the non-spatial baseline exposure is calibrated too: white
    // noise has d^2 = n / (n - 1).
    bool applied = false;
};

struct PrecisionInputs {
    LocationSet locs;
    PrecisionScenario scenario;
    PrecisionCalibration calibration;
};

struct ExpectedPrecision {
    double precision = 0.0;       // E_X Prec(beta_GLS)
    double effective_n = 0.0;     // the bracketed trace term
    double baseline = 0.0;        // sigma_x2 (n - 1) / (sigma_g2 + tau2), times n / (n - 1) if calibrated
    [[nodiscard]] double relative() const { return precision / baseline; }
};

// Factors Sigma~ once for repeated use.
class PrecisionModel {
public:
    explicit PrecisionModel(const PrecisionInputs& inputs);

    // Expected GLS precision over X given the locations:
    //   d_x^2 sigma_x2 / (sigma_g2 + tau2)
    //     * (tr(Sigma~^{-1} R_x) - 1'Sigma~^{-1} R_x Sigma~^{-1} 1 / 1'Sigma~^{-1} 1).
    [[nodiscard]] ExpectedPrecision expected_gls_precision() const;

    // 1 / Var(beta_GLS) for one exposure vector.
    [[nodiscard]] double gls_precision(const Eigen::VectorXd& x) const;
    // 1 / true Var(beta_OLS) (sandwich) for one exposure vector.
    [[nodiscard]] double ols_precision(const Eigen::VectorXd& x) const;
    // (1/n) W' Sigma~ W with W = (X - mean) / s, s^2 the divide-by-n variance:
    // true over naive OLS variance when the naive formula uses sigma_g2 + tau2.
    [[nodiscard]] double naive_ols_variance_ratio(const Eigen::VectorXd& x) const;

    [[nodiscard]] Eigen::VectorXd draw_x(Rng& rng) const;

    [[nodiscard]] const Eigen::MatrixXd& scaled_residual() const { return sigma_tilde_; }
    [[nodiscard]] const Eigen::MatrixXd& exposure_correlation() const { return r_x_; }
    [[nodiscard]] const PrecisionInputs& inputs() const { return inputs_; }

private:
    PrecisionInputs inputs_;
    Eigen::MatrixXd r_x_;
    Eigen::MatrixXd sigma_tilde_;
    SpdFactor sigma_factor_;
    SpdFactor x_factor_;
};

[[nodiscard]] ExpectedPrecision expected_gls_precision(const PrecisionInputs& inputs);

// (1/n) W' Sigma~ W for an explicit Sigma~.
[[nodiscard]] double naive_ols_variance_ratio(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma_tilde);

struct MonteCarloSummary {
    double mean = 0.0;
    double se = 0.0;
    int n = 0;
};

// Mean (and SE) over location draws of the expected precision relative to the
// non-spatial baseline. Calibration factors, when requested, come from
// calibration_reps location draws of the same design.
struct RelativePrecisionSpec {
    PrecisionScenario scenario;
    Eigen::Index n = 100;
    DesignSpec design;
    bool calibrate = true;
    int calibration_reps = 100;
};
[[nodiscard]] MonteCarloSummary relative_gls_precision(const RelativePrecisionSpec& spec, int n_location_reps,
                                                       std::uint64_t seed);

struct RatioSummary {
    MonteCarloSummary ratio;      // Prec(GLS) / Prec(OLS)
    MonteCarloSummary log_ratio;  // natural log of the same
};

// Monte Carlo over X draws on fixed locations; scale factors cancel.
[[nodiscard]] RatioSummary gls_ols_precision_ratio(const PrecisionInputs& inputs, int n_sims, std::uint64_t seed);

// Monte Carlo mean of naive_ols_variance_ratio over X draws.
[[nodiscard]] MonteCarloSummary expected_naive_ols_variance_ratio(const PrecisionInputs& inputs, int n_sims,
                                                                  std::uint64_t seed);

[[nodiscard]] MonteCarloSummary summarise(const Eigen::ArrayXd& values);

} // namespace spatconf
