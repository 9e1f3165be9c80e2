#include "spatconf/estimators.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "spatconf/errors.hpp"
#include "spatconf/format.hpp"
#include "spatconf/optimize.hpp"

namespace spatconf {

std::string to_string(FitMethod method) {
    switch (method) {
    case FitMethod::OLS: return "OLS";
    case FitMethod::GLS: return "GLS";
    case FitMethod::ML: return "ML";
    case FitMethod::REML: return "REML";
    case FitMethod::RegSpline: return "RegSpline";
    case FitMethod::PenSpline: return "PenSpline";
    }
    return "unknown";
}

FitMethod fit_method_from_string(const std::string& name) {
    for (auto m : {FitMethod::OLS, FitMethod::GLS, FitMethod::ML, FitMethod::REML, FitMethod::RegSpline,
                   FitMethod::PenSpline}) {
        if (to_string(m) == name) return m;
    }
    throw DomainError("unknown fit method '" + name + "'");
}

void write_fit_csv_header(std::ostream& os) {
    os << "method,beta0_hat,betax_hat,se_betax,sigma_g2_hat,tau2_hat,theta_g_hat,edf,lambda,loglik,converged\n";
}

void write_fit_csv_row(std::ostream& os, const FitResult& fit) {
    auto opt = [&](const std::optional<double>& v) {
        if (v) os << format_double(*v);
    };
    os << to_string(fit.method) << ',' << format_double(fit.beta0_hat) << ',' << format_double(fit.betax_hat) << ','
       << format_double(fit.se_betax) << ',';
    if (fit.components) {
        os << format_double(fit.components->sigma_g2) << ',' << format_double(fit.components->tau2) << ','
           << format_double(fit.components->theta_g) << ',';
    } else {
        os << ",,,";
    }
    opt(fit.edf);
    os << ',';
    opt(fit.lambda);
    os << ',';
    opt(fit.loglik);
    os << ',' << (fit.converged ? 1 : 0) << '\n';
}

namespace {

void check_sizes(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw DomainError("X and Y lengths differ");
}

double centred_sum_squares(const Eigen::VectorXd& x) { return (x.array() - x.mean()).square().sum(); }

void check_nonconstant(const Eigen::VectorXd& x) {
    const double sxx = centred_sum_squares(x);
    const double scale = x.squaredNorm();
    if (!(sxx > 1e-14 * std::max(scale, 1e-300))) throw SingularDesignError("design [1 X] is singular: X is constant");
}

struct GlsSolution {
    Eigen::Vector2d beta;
    Eigen::Matrix2d cov;      // (X' Sigma^{-1} X)^{-1}
    double quad = 0.0;        // r' Sigma^{-1} r at beta
    double log_det_info = 0.0; // log |X' Sigma^{-1} X|
};

GlsSolution solve_gls(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SpdFactor& factor) {
    const Eigen::MatrixXd wx = factor.whiten(intercept_design(x));
    const Eigen::VectorXd wy = factor.whiten(y);
    const Eigen::Matrix2d info = wx.transpose() * wx;
    const double det = info.determinant();
    if (!(det > 1e-12 * info(0, 0) * info(1, 1))) throw SingularDesignError("GLS information matrix is singular");
    GlsSolution s;
    s.cov = info.inverse();
    s.beta = s.cov * (wx.transpose() * wy);
    s.quad = (wy - wx * s.beta).squaredNorm();
    s.log_det_info = std::log(det);
    return s;
}

constexpr double kLog2Pi = 1.8378770664093454836;

} // namespace

FitResult ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_sizes(x, y);
    if (x.size() < 3) throw DomainError("ols_fit: need at least three observations");
    check_nonconstant(x);
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    FitResult fit;
    fit.method = FitMethod::OLS;
    fit.betax_hat = xc.dot(y) / sxx;
    fit.beta0_hat = y.mean() - fit.betax_hat * x.mean();
    const Eigen::VectorXd resid = y.array() - fit.beta0_hat - fit.betax_hat * x.array();
    const double sigma2 = resid.squaredNorm() / static_cast<double>(x.size() - 2);
    fit.se_betax = std::sqrt(sigma2 / sxx);
    return fit;
}

double ols_true_variance(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != x.size() || sigma.cols() != x.size()) throw DomainError("ols_true_variance: size mismatch");
    check_nonconstant(x);
    // Row 2 of (X'X)^{-1} X' is (x - xbar)' / Sxx.
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    return xc.dot(sigma * xc) / (sxx * sxx);
}

FitResult gls_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != x.size() || sigma.cols() != x.size()) throw DomainError("gls_fit: size mismatch");
    return gls_fit(x, y, SpdFactor(sigma));
}

FitResult gls_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SpdFactor& sigma) {
    check_sizes(x, y);
    if (sigma.size() != x.size()) throw DomainError("gls_fit: size mismatch");
    const auto s = solve_gls(x, y, sigma);
    FitResult fit;
    fit.method = FitMethod::GLS;
    fit.beta0_hat = s.beta(0);
    fit.betax_hat = s.beta(1);
    fit.se_betax = std::sqrt(s.cov(1, 1));
    return fit;
}

double gls_slope_variance(const Eigen::VectorXd& x, const SpdFactor& sigma) {
    const Eigen::MatrixXd wx = sigma.whiten(intercept_design(x));
    const Eigen::Matrix2d info = wx.transpose() * wx;
    const double det = info.determinant();
    if (!(det > 1e-12 * info(0, 0) * info(1, 1))) throw SingularDesignError("GLS information matrix is singular");
    return info(0, 0) / det;
}

double mixed_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LocationSet& locs, double nu,
                    const MixedParams& params, double beta0, double betax) {
    check_sizes(x, y);
    if (locs.size() != x.size()) throw DomainError("mixed_loglik: location count mismatch");
    Eigen::MatrixXd sigma = params.sigma_g2 * correlation_matrix(locs, {params.theta_g, nu});
    sigma.diagonal().array() += params.tau2;
    const SpdFactor f(sigma);
    const Eigen::VectorXd r = y.array() - beta0 - betax * x.array();
    const Eigen::VectorXd wr = f.whiten(r);
    const auto n = static_cast<double>(x.size());
    return -0.5 * (n * kLog2Pi + f.log_det() + wr.squaredNorm());
}

double mixed_profile_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LocationSet& locs, double nu,
                            const MixedParams& params, Criterion criterion) {
    check_sizes(x, y);
    if (locs.size() != x.size()) throw DomainError("mixed_profile_loglik: location count mismatch");
    Eigen::MatrixXd sigma = params.sigma_g2 * correlation_matrix(locs, {params.theta_g, nu});
    sigma.diagonal().array() += params.tau2;
    const SpdFactor f(sigma);
    const auto s = solve_gls(x, y, f);
    const auto n = static_cast<double>(x.size());
    if (criterion == Criterion::ML) return -0.5 * (n * kLog2Pi + f.log_det() + s.quad);
    return -0.5 * ((n - 2.0) * kLog2Pi + f.log_det() + s.log_det_info + s.quad);
}

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct ProfiledFit {
    double loglik = -std::numeric_limits<double>::infinity();
    double scale = 0.0;   // total variance sigma_g2 + tau2
    GlsSolution gls;
};

// Profile likelihood in (theta, p) with Sigma = s2 [p R(theta) + (1 - p) I];
// s2 and beta are maximised in closed form.
ProfiledFit profile(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& dist, double nu,
                    double theta, double p, Criterion criterion) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(x.size(), x.size());
    if (p > 0.0) {
        v = p * correlation_from_distances(dist, {theta, nu});
        v.diagonal().array() += 1.0 - p;
    }
    const SpdFactor f(v);
    ProfiledFit out;
    out.gls = solve_gls(x, y, f);
    const auto n = static_cast<double>(x.size());
    const double dof = criterion == Criterion::ML ? n : n - 2.0;
    out.scale = out.gls.quad / dof;
    if (!(out.scale > 0.0)) {
        out.loglik = std::numeric_limits<double>::infinity();
        return out;
    }
    out.loglik = -0.5 * (dof * (kLog2Pi + std::log(out.scale)) + f.log_det() + dof);
    if (criterion == Criterion::REML) out.loglik -= 0.5 * out.gls.log_det_info;
    return out;
}

} // namespace

FitResult mixed_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LocationSet& locs, double nu_fit,
                    Criterion criterion, const MixedControl& control) {
    check_sizes(x, y);
    if (x.size() < 10) throw DomainError("mixed_fit: need at least ten observations");
    if (locs.size() != x.size()) throw DomainError("mixed_fit: location count mismatch");
    check_nonconstant(x);
    MaternSpec{control.theta_min, nu_fit}.validate();
    const Eigen::MatrixXd dist = locs.distance_matrix();

    // Y exactly linear in X: no residual variance to apportion.
    {
        const auto exact = profile(x, y, dist, nu_fit, control.theta_min, 0.0, criterion);
        const double eps = 64.0 * std::numeric_limits<double>::epsilon();
        if (exact.gls.quad <= eps * eps * y.squaredNorm()) {
            FitResult fit;
            fit.method = criterion == Criterion::ML ? FitMethod::ML : FitMethod::REML;
            fit.beta0_hat = exact.gls.beta(0);
            fit.betax_hat = exact.gls.beta(1);
            fit.se_betax = 0.0;
            fit.components = VarianceComponents{0.0, 0.0, control.theta_min};
            return fit;
        }
    }

    constexpr double kLogitBound = 12.0;
    const Eigen::Vector2d lower(std::log(control.theta_min), -kLogitBound);
    const Eigen::Vector2d upper(std::log(control.theta_max), kLogitBound);
    auto objective = [&](const Eigen::VectorXd& t) {
        try {
            return -profile(x, y, dist, nu_fit, std::exp(t(0)), logistic(t(1)), criterion).loglik;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const std::array<Eigen::Vector2d, 3> starts = {Eigen::Vector2d(std::log(0.1), 0.0),
                                                   Eigen::Vector2d(std::log(0.4), -1.5),
                                                   Eigen::Vector2d(std::log(1.0), 1.5)};
    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    const int restarts = std::max(1, std::min<int>(control.restarts, static_cast<int>(starts.size())));
    for (int r = 0; r < restarts; ++r) {
        auto res = nelder_mead(objective, starts[static_cast<std::size_t>(r)], Eigen::Vector2d(0.7, 1.5), lower,
                               upper, control.max_evals, control.ftol);
        if (res.value < best.value) best = std::move(res);
    }
    if (!std::isfinite(best.value)) throw NumericalError("mixed_fit: likelihood could not be evaluated");

    double theta = std::exp(best.x(0));
    double p = logistic(best.x(1));
    // Boundary sigma_g2 = 0 (the OLS model) is admissible.
    const auto at_zero = profile(x, y, dist, nu_fit, theta, 0.0, criterion);
    if (-at_zero.loglik <= best.value) p = 0.0;
    const auto fitted = p == 0.0 ? at_zero : profile(x, y, dist, nu_fit, theta, p, criterion);

    FitResult fit;
    fit.method = criterion == Criterion::ML ? FitMethod::ML : FitMethod::REML;
    fit.beta0_hat = fitted.gls.beta(0);
    fit.betax_hat = fitted.gls.beta(1);
    fit.se_betax = std::sqrt(fitted.scale * fitted.gls.cov(1, 1));
    fit.components = VarianceComponents{p * fitted.scale, (1.0 - p) * fitted.scale, theta};
    fit.loglik = fitted.loglik;
    fit.converged = best.converged;
    return fit;
}

} // namespace spatconf
