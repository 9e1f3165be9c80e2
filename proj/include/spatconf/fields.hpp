#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatconf/covariance.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/locations.hpp"
#include "spatconf/rng.hpp"

namespace spatconf {

// ---------------------------------------------------------------------------
// Sampling designs

enum class DesignKind { Uniform, Grid, Cluster };

struct DesignSpec {
    DesignKind kind = DesignKind::Uniform;
    double mean_children = 7.0;   // cluster design only
    double kernel_sd = 0.03;      // cluster design only
};

[[nodiscard]] std::string to_string(DesignKind kind);
[[nodiscard]] DesignKind design_from_string(const std::string& name);

// n i.i.d. uniform points on [0,1]^2.
[[nodiscard]] LocationSet sample_uniform(Eigen::Index n, std::uint64_t seed);

// sqrt(n) x sqrt(n) endpoint-inclusive lattice on [0,1]^2, x varying slowest.
[[nodiscard]] LocationSet sample_grid(Eigen::Index n);

// Poisson cluster process: uniform parents, Poisson(mean_children) offspring
// per parent displaced by isotropic N(0, kernel_sd^2), generated until at
// least n points exist; the first n are kept and clipped to [0,1]^2.
[[nodiscard]] LocationSet sample_poisson_cluster(Eigen::Index n, double mean_children,
                                                 double kernel_sd, std::uint64_t seed);

// Dispatches on design kind; the grid design ignores the seed.
[[nodiscard]] LocationSet sample_design(const DesignSpec& design, Eigen::Index n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gaussian process draws

struct FieldSpec {
    double mean = 0.0;
    double variance = 1.0;           // sigma^2 before calibration
    MaternSpec matern;
    bool calibrated = false;
    double calibration_factor = 1.0; // d; used only when calibrated

    [[nodiscard]] double effective_variance() const {
        return calibrated ? calibration_factor * calibration_factor * variance : variance;
    }
};

// Holds the (jittered) Cholesky factor of a correlation matrix and draws
// unit-variance correlated fields L w from it.
class CorrelatedSampler {
public:
    CorrelatedSampler() = default;
    CorrelatedSampler(const LocationSet& locs, const MaternSpec& spec);
    explicit CorrelatedSampler(const Eigen::MatrixXd& correlation);

    [[nodiscard]] Eigen::VectorXd draw(Rng& rng) const;
    [[nodiscard]] const Eigen::MatrixXd& correlation() const { return corr_; }
    [[nodiscard]] const SpdFactor& factor() const { return factor_; }

private:
    Eigen::MatrixXd corr_;
    SpdFactor factor_;
};

// mean + sqrt(effective variance) * L w, deterministic given seed.
[[nodiscard]] Eigen::VectorXd sample_gp(const LocationSet& locs, const FieldSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sample-variance calibration
//
// For X ~ N(0, sigma^2 R) the divide-by-n sample variance has expectation
// sigma^2 (1 - 1'R1/n^2). The calibration factor d satisfies
// d^2 = 1 / E[1 - 1'R1/n^2], so a field drawn with variance d^2 sigma^2 has
// expected sample variance sigma^2.

// Shrinkage term 1 - 1'R1/n^2 for one correlation matrix.
[[nodiscard]] double sample_variance_shrinkage(const Eigen::MatrixXd& correlation);

// d for a fixed location set.
[[nodiscard]] double calibration_factor(const LocationSet& locs, const MaternSpec& spec);

// d averaged over n_reps location draws from the design (one draw suffices
// for the grid design, whose locations are fixed).
[[nodiscard]] double calibration_factor(const MaternSpec& spec, Eigen::Index n, const DesignSpec& design,
                                        int n_reps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Confounded exposure / outcome scenarios

struct ScenarioParams {
    double beta0 = 0.0;
    double beta_x = 0.5;
    double beta_z = 1.0;
    double sigma_c2 = 1.0;
    double sigma_u2 = 1.0;
    double sigma_z2 = 1.0;
    double tau2 = 4.0;
    double rho = 0.3;
    double theta_c = 0.5;
    double theta_u = 0.5;
    double nu = 2.0;
    double sigma_h2 = 0.0;              // extra residual field, multiscale variant
    std::optional<double> theta_h;      // defaults to theta_u
    double mu_x = 0.0;
    double mu_z = 0.0;

    void validate() const;

    [[nodiscard]] double p_c() const { return sigma_c2 / (sigma_c2 + sigma_u2); }
    [[nodiscard]] double p_z() const {
        const double s = beta_z * beta_z * sigma_z2;
        return s / (s + tau2);
    }
    [[nodiscard]] double range_h() const { return theta_h.value_or(theta_u); }
    [[nodiscard]] MaternSpec matern_c() const { return {theta_c, nu}; }
    [[nodiscard]] MaternSpec matern_u() const { return {theta_u, nu}; }
    [[nodiscard]] MaternSpec matern_h() const { return {range_h(), nu}; }
};

// Calibration factors for the confounded, unconfounded and extra-residual
// fields. Z shares d_c with X_c. Identity (all ones) means uncalibrated.
struct Calibration {
    double d_c = 1.0;
    double d_u = 1.0;
    double d_h = 1.0;
};

// Calibration for a scenario under a design, one factor per distinct range.
[[nodiscard]] Calibration scenario_calibration(const ScenarioParams& params, Eigen::Index n,
                                               const DesignSpec& design, int n_reps, std::uint64_t seed);

struct ConfoundedDraw {
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    Eigen::VectorXd x_c;
    Eigen::VectorXd x_u;
};

// Factors the correlation matrices of one location set once and draws
// scenario realisations from them:
//   X_c = d_c sigma_c e1,  X_u = d_u sigma_u e_u,  X = mu_x + X_c + X_u,
//   Z   = mu_z + sigma_z d_c (rho e1 + sqrt(1 - rho^2) e2),
// with e1, e2 ~ N(0, R(theta_c)) and e_u ~ N(0, R(theta_u)) independent.
// Then Cov(X_c, Z) = rho sigma_c sigma_z d_c^2 R(theta_c) and
// Cov(Z) = sigma_z^2 d_c^2 R(theta_c).
class ScenarioSampler {
public:
    ScenarioSampler(const LocationSet& locs, const ScenarioParams& params, const Calibration& calib,
                    bool multiscale = false);

    [[nodiscard]] ConfoundedDraw draw_pair(Rng& rng) const;
    // Y = beta0 + beta_x X + beta_z Z + [h] + eps, eps ~ N(0, tau2 I),
    // h ~ N(0, d_h^2 sigma_h2 R(theta_h)) when multiscale.
    [[nodiscard]] Eigen::VectorXd draw_outcome(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                               Rng& rng) const;

    [[nodiscard]] const Eigen::MatrixXd& corr_c() const { return sampler_c_.correlation(); }
    [[nodiscard]] const Eigen::MatrixXd& corr_u() const { return sampler_u_.correlation(); }
    [[nodiscard]] const Eigen::MatrixXd& corr_h() const { return sampler_h_.correlation(); }
    [[nodiscard]] const ScenarioParams& params() const { return params_; }
    [[nodiscard]] const Calibration& calibration() const { return calib_; }
    [[nodiscard]] bool multiscale() const { return multiscale_; }

private:
    ScenarioParams params_;
    Calibration calib_;
    bool multiscale_;
    Eigen::Index n_;
    CorrelatedSampler sampler_c_;
    CorrelatedSampler sampler_u_;
    CorrelatedSampler sampler_h_;
};

[[nodiscard]] ConfoundedDraw sample_confounded_pair(const LocationSet& locs, const ScenarioParams& params,
                                                    const Calibration& calib, std::uint64_t seed);

[[nodiscard]] Eigen::VectorXd sample_outcome(const LocationSet& locs, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& z, const ScenarioParams& params,
                                             const Calibration& calib, std::uint64_t seed, bool multiscale);

// Divide-by-n sample variance.
[[nodiscard]] double sample_variance(const Eigen::VectorXd& v);

// CSV with columns x, y followed by one column per named value vector.
void write_field_csv(std::ostream& os, const LocationSet& locs,
                     const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns);

} // namespace spatconf
