#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatconf/bias.hpp"
#include "spatconf/estimators.hpp"
#include "spatconf/fields.hpp"

namespace spatconf {

enum class ExperimentId { BiasGrid, EstimatedFitGrid, MseCoverageGrid, FixedEdfGrid, PrecisionGrid };

// "bias-grid", "estimated-fit-grid", "mse-coverage-grid", "fixed-edf-grid", "precision-grid".
[[nodiscard]] std::string to_string(ExperimentId id);
[[nodiscard]] ExperimentId experiment_from_string(const std::string& name);

[[nodiscard]] std::vector<double> default_theta_grid();

struct ExperimentSpec {
    ExperimentId id = ExperimentId::EstimatedFitGrid;

    // Row and column ranges: (theta_c, theta_u) for the bias and fit grids,
    // (theta_x, theta_g) for the precision grid.
    std::vector<double> theta_row = default_theta_grid();
    std::vector<double> theta_col = default_theta_grid();

    // Fit grids simulate from this scenario with theta_c, theta_u taken from the grid.
    ScenarioParams scenario;
    // Bias grid panels.
    std::vector<double> p_c{0.1, 0.5, 0.9};
    std::vector<double> p_z{0.1, 0.5, 0.9};
    // Precision grid panels.
    std::vector<double> p_g{0.1, 0.5, 0.9};

    // Replicates per cell. Unset means the experiment's desk-scale count times
    // `scale` (at least 2), or the full count when `full` is set.
    std::optional<int> n_sims;
    double scale = 1.0;
    bool full = false;

    Eigen::Index n = 100;
    // Unset means the fixed grid for the bias grid and uniform otherwise.
    std::optional<DesignSpec> design;
    bool calibrate = true;
    int calibration_reps = 100;
    bool multiscale = false;

    double nu_fit = 2.0;
    Criterion criterion = Criterion::ML;
    Eigen::Index spline_k = 60;
    std::vector<int> edf_ladder{5, 15, 30};

    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const;
    [[nodiscard]] int resolved_sims() const;
    [[nodiscard]] DesignSpec resolved_design() const;
};

// Replicate counts per cell at desk scale and at full scale.
[[nodiscard]] int desk_sims(ExperimentId id);
[[nodiscard]] int full_sims(ExperimentId id);

// One (cell, method) summary of a fit grid. Errors are beta_x_hat - beta_x
// over the replicates where the method succeeded. NaN marks a column that
// does not apply to the method.
struct FitCellSummary {
    double theta_c = 0.0;
    double theta_u = 0.0;
    std::string method;
    int n_ok = 0;
    int n_failed = 0;
    int n_nonconverged = 0;
    double mean_betax = 0.0;
    double bias = 0.0;
    double rel_bias = 0.0;
    double se_rel_bias = 0.0;
    double variance = 0.0;   // divide by n_ok - 1
    double se_variance = 0.0;
    double mse = 0.0;
    double se_mse = 0.0;
    double mean_se2 = 0.0;
    double se_mean_se2 = 0.0;
    double coverage = 0.0;
    double se_coverage = 0.0;
    double mean_edf = 0.0;
    double se_edf = 0.0;
    double max_edf_dev = 0.0;  // largest |edf - target| for fixed-e.d.f. fits
    // beta_x_hat per replicate, NaN where the fit failed; not written to CSV.
    std::vector<double> estimates;
};

struct PrecisionCellSummary {
    double theta_x = 0.0;
    double theta_g = 0.0;
    double p_g = 0.0;
    std::string statistic;
    double mean = 0.0;
    double se = 0.0;
    int n_sims = 0;
};

struct GridResult {
    ExperimentId id = ExperimentId::EstimatedFitGrid;
    int n_sims = 0;
    std::vector<KGridCell> bias_cells;
    std::vector<FitCellSummary> fit_cells;
    std::vector<PrecisionCellSummary> precision_cells;

    // Failed fits over attempted fits, across all cells and methods.
    [[nodiscard]] double exclusion_rate() const;
    [[nodiscard]] const FitCellSummary& fit(double theta_c, double theta_u, const std::string& method) const;
    [[nodiscard]] const PrecisionCellSummary& precision(double theta_x, double theta_g, double p_g,
                                                        const std::string& statistic) const;
    [[nodiscard]] const KGridCell& bias(double theta_c, double theta_u, double p_c, double p_z) const;
};

// k(X) maps for every (p_c, p_z) panel.
[[nodiscard]] GridResult run_bias_grid(const ExperimentSpec& spec);

// Fresh locations, exposure and outcome per replicate; methods OLS, GLS
// (known covariance), GLS-k (conditional mean beta_x + k(X) times the
// same-scale bias), ML or REML mixed model, and GCV penalized spline.
[[nodiscard]] GridResult run_estimated_fit_grid(const ExperimentSpec& spec);

// Same simulation restricted to the mixed model and the penalized spline.
[[nodiscard]] GridResult run_mse_coverage_grid(const ExperimentSpec& spec);

// Regression splines (RegSpline-t) and penalized splines at fixed e.d.f.
// (PenSpline-t) for each t in the e.d.f. ladder.
[[nodiscard]] GridResult run_fixed_edf_grid(const ExperimentSpec& spec);

// Per (p_g, theta_x, theta_g) cell over fresh locations and exposures:
//   rel_gls_precision      expected GLS precision over the non-spatial baseline
//   gls_ols_ratio          Prec(GLS) / Prec(OLS)
//   mean_log_gls_ols_ratio mean of its log
//   naive_ratio            true over naive OLS variance
// plus log_rel_gls_precision, log_gls_ols_ratio and log_naive_ratio, the natural
// log of the corresponding mean with a delta-method SE.
[[nodiscard]] GridResult run_precision_grid(const ExperimentSpec& spec);

[[nodiscard]] GridResult run_experiment(const ExperimentSpec& spec);

// One CSV per experiment: the k grid header for the bias grid,
// kFitGridHeader for the fit grids and kPrecisionGridHeader for the precision grid.
extern const char* const kFitGridHeader;
extern const char* const kPrecisionGridHeader;
void write_grid_csv(std::ostream& os, const GridResult& result);

} // namespace spatconf
