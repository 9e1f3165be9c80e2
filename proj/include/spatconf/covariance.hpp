#pragma once

#include <Eigen/Dense>

#include "spatconf/locations.hpp"

namespace spatconf {

// Matérn correlation parameters: range theta and smoothness nu.
//
//   R(d) = (2 sqrt(nu) d / theta)^nu K_nu(2 sqrt(nu) d / theta) / (Gamma(nu) 2^(nu-1))
//
// nu = 0.5 is the exponential kernel exp(-sqrt(2) d / theta). Only integer and
// half-integer smoothness values are supported.
struct MaternSpec {
    double theta = 0.5;
    double nu = 2.0;

    // Throws DomainError (UnsupportedOrderError for an unsupported nu).
    void validate() const;
};

// Modified Bessel function of the second kind, K_nu(x), for x > 0 and
// nu an integer or half-integer (negative orders by symmetry K_{-nu} = K_nu).
//
// Orders 0 and 1 use the SLATEC FNLIB Chebyshev expansions (BK0CS/AK0CS/
// AK02CS, BK1CS/AK1CS/AK12CS with BI0CS/BI1CS for the small-argument log
// term); higher integer orders use the upward recurrence
// K_{m+1} = K_{m-1} + (2m/x) K_m. Half-integer orders use the closed form
// K_{n+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_k (n+k)!/(k!(n-k)!) (2x)^{-k}.
[[nodiscard]] double bessel_k(double nu, double x);

// Evaluates one Matérn kernel repeatedly with the normalising constants
// precomputed. matern() below is the one-shot form.
class MaternKernel {
public:
    explicit MaternKernel(const MaternSpec& spec);

    [[nodiscard]] double operator()(double d) const;
    [[nodiscard]] const MaternSpec& spec() const { return spec_; }

private:
    MaternSpec spec_;
    double scale_;      // 2 sqrt(nu) / theta
    double norm_;       // 1 / (Gamma(nu) 2^(nu - 1))
    int half_order_;    // n for nu = n + 1/2, or -1 for integer nu
};

[[nodiscard]] double matern(double d, const MaternSpec& spec);

// n x n Matérn correlation matrix: symmetric, unit diagonal.
[[nodiscard]] Eigen::MatrixXd correlation_matrix(const LocationSet& locs, const MaternSpec& spec);
[[nodiscard]] Eigen::MatrixXd correlation_from_distances(const Eigen::MatrixXd& dist,
                                                         const MaternSpec& spec);

} // namespace spatconf
