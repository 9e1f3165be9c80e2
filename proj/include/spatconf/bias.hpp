#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "spatconf/fields.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/locations.hpp"

namespace spatconf {

struct BiasInputs {
    LocationSet locs;
    ScenarioParams params;
    Calibration calibration;
    // Include the extra residual field h in the covariance used by GLS.
    bool multiscale = false;
};

// rho (sigma_z / sigma_c) beta_z for a single-scale exposure (sigma_u2 = 0).
[[nodiscard]] double same_scale_bias(const ScenarioParams& params);

// Factors the covariances of one scenario on one location set so that the
// bias-modulation term k(X) can be evaluated for many exposures X.
//
// With A = d_c^2 sigma_c2 R(theta_c) and B = d_u^2 sigma_u2 R(theta_u), the
// conditional mean of the confounded part is E[X_c | X] = A (A + B)^{-1} (X - mu_x),
// which equals p_c M (X - mu_x) in the uncalibrated case. Then
//   k(X) = [(X' S^{-1} X)^{-1} X' S^{-1} E[X_c | X]]_2
// for the GLS residual covariance S = d_c^2 beta_z^2 sigma_z2 R(theta_c) + tau2 I
// (+ d_h^2 sigma_h2 R(theta_h) in the multiscale variant), and the conditional
// bias of the GLS slope is k(X) rho (sigma_z / sigma_c) beta_z.
class BiasModel {
public:
    explicit BiasModel(const BiasInputs& inputs);

    [[nodiscard]] double k(const Eigen::VectorXd& x) const;
    // Same with S replaced by the identity (OLS).
    [[nodiscard]] double k_ols(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd conditional_confounded(const Eigen::VectorXd& x) const;

    // X ~ N(mu_x, A + B).
    [[nodiscard]] Eigen::VectorXd draw_x(Rng& rng) const;
    // rho (sigma_z / sigma_c) beta_z; zero when sigma_c2 = 0 and rho = 0.
    [[nodiscard]] double bias_multiplier() const;

    [[nodiscard]] const SpdFactor& residual_factor() const { return resid_; }
    [[nodiscard]] const Eigen::MatrixXd& residual_covariance() const { return resid_cov_; }
    [[nodiscard]] const ScenarioParams& params() const { return params_; }

private:
    ScenarioParams params_;
    Eigen::MatrixXd b_;
    SpdFactor exposure_;
    Eigen::MatrixXd resid_cov_;
    SpdFactor resid_;
};

[[nodiscard]] double k_of_x(const Eigen::VectorXd& x, const BiasInputs& inputs);
[[nodiscard]] double ols_k_of_x(const Eigen::VectorXd& x, const BiasInputs& inputs);

// Scenario used for the k(X) maps: sigma_c2 = p_c, sigma_u2 = 1 - p_c,
// beta_z = sqrt(p_z), sigma_z = 1, tau2 = 1 - p_z. The multiscale variant
// moves half of the non-confounder residual variance into the extra field h
// (range theta_u), so total residual variance and p_z are unchanged.
[[nodiscard]] ScenarioParams k_grid_params(double theta_c, double theta_u, double p_c, double p_z,
                                           bool multiscale = false, double nu = 2.0);

struct KGridSpec {
    std::vector<double> theta_c;
    std::vector<double> theta_u;
    double p_c = 0.5;
    double p_z = 0.5;
    Eigen::Index n = 100;
    DesignSpec design{DesignKind::Grid};
    int n_sims = 1000;
    std::uint64_t seed = 1;
    bool calibrate = true;
    int calibration_reps = 100;  // redrawn designs only
    bool multiscale = false;
    double nu = 2.0;
    int jobs = 1;
};

struct KGridCell {
    double theta_c = 0.0;
    double theta_u = 0.0;
    double p_c = 0.0;
    double p_z = 0.0;
    double mean_k = 0.0;
    double se_k = 0.0;
    double mean_k_ols = 0.0;
    double se_k_ols = 0.0;
    int n_sims = 0;
};

// Monte Carlo mean and standard error of k(X) per (theta_c, theta_u) cell.
// The grid design keeps its locations fixed; other designs redraw them per
// replicate. Replicate r of a cell uses the seed stream
// (seed, cell row, cell column, r), so results do not depend on jobs.
[[nodiscard]] std::vector<KGridCell> expected_k_grid(const KGridSpec& spec);

void write_k_grid_csv(std::ostream& os, const std::vector<KGridCell>& cells);

} // namespace spatconf
