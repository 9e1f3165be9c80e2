#pragma once

#include <optional>

#include <Eigen/Dense>

#include "spatconf/estimators.hpp"
#include "spatconf/locations.hpp"

namespace spatconf {

// Thin-plate radial function r^2 log r, with eta(0) = 0.
[[nodiscard]] double tps_eta(double r);

// Low-rank thin-plate spline for g(s) in Y = b0 + bx X + g(s) + eps.
//
// Basis dimension k counts the columns used for g: k - 2 radial columns built
// from k' = k + 1 knots (k' radial functions reduced by the three thin-plate
// side conditions) plus the two linear coordinate terms. The constant is left
// to the model intercept and every column is centred. The penalty is the
// bending energy of the radial part; the linear terms are unpenalised.
struct SplineBasis {
    Eigen::MatrixXd basis_matrix;    // n x k
    Eigen::MatrixXd penalty_matrix;  // k x k, PSD
    Eigen::Index k = 0;
    Coords knots;                    // k' = k + 1 rows

    // Number of unpenalised smooth columns (the linear terms).
    static constexpr Eigen::Index kNullDim = 2;
};

// Deterministic greedy max-min subset of size m, seeded with the location
// closest to the centroid.
[[nodiscard]] std::vector<Eigen::Index> farthest_point_subset(const LocationSet& locs, Eigen::Index m);

// Requires 3 <= k <= n - 1.
[[nodiscard]] SplineBasis build_tps_basis(const LocationSet& locs, Eigen::Index k);

enum class SmoothMode { GCV, FixedEDF, Unpenalized, FixedLambda };

struct SmoothControl {
    SmoothMode mode = SmoothMode::GCV;
    std::optional<double> target_edf;  // FixedEDF
    std::optional<double> lambda;      // FixedLambda
    double lambda_min = 1e-8;          // GCV search range
    double lambda_max = 1e8;
    int grid_points = 65;
};

// Penalised least squares for [1 X B] with penalty lambda * gamma' P gamma.
// e.d.f. is the trace of the hat matrix and includes the intercept and X, so
// it ranges from 4 (lambda -> infinity) to k + 2 (lambda = 0).
// se_betax uses sigma_hat^2 = RSS / (n - edf) with the penalised sandwich
// (A'A + lambda P)^{-1} A'A (A'A + lambda P)^{-1}.
// Mode Unpenalized reports method RegSpline; the others report PenSpline.
[[nodiscard]] FitResult partial_spline_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                           const SplineBasis& basis, const SmoothControl& control);

// Basis dimension of the regression spline whose e.d.f. (including intercept
// and X) equals target_edf.
[[nodiscard]] Eigen::Index regression_spline_dimension(int target_edf);

} // namespace spatconf
