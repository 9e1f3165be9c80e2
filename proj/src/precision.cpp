#include "spatconf/precision.hpp"

#include <cmath>

#include "spatconf/errors.hpp"
#include "spatconf/estimators.hpp"

namespace spatconf {

void PrecisionScenario::validate() const {
    if (!(p_g >= 0.0 && p_g <= 1.0)) throw DomainError("p_g must lie in [0, 1]");
    if (!(sigma_x2 >= 0.0)) throw DomainError("sigma_x2 must be non-negative");
    if (!(total_resid > 0.0)) throw DomainError("total residual variance must be positive");
    MaternSpec{theta_x, nu}.validate();
    MaternSpec{theta_g, nu}.validate();
}

PrecisionModel::PrecisionModel(const PrecisionInputs& inputs) : inputs_(inputs) {
    const auto& sc = inputs_.scenario;
    sc.validate();
    const Eigen::Index n = inputs_.locs.size();
    if (n < 3) throw DomainError("precision: need at least three locations");
    const Eigen::MatrixXd dist = inputs_.locs.distance_matrix();
    r_x_ = correlation_from_distances(dist, {sc.theta_x, sc.nu});
    const double dg2 = inputs_.calibration.d_g * inputs_.calibration.d_g;
    if (sc.p_g > 0.0) {
        sigma_tilde_ = sc.p_g * dg2 *
                       (sc.theta_g == sc.theta_x ? r_x_ : correlation_from_distances(dist, {sc.theta_g, sc.nu}));
        sigma_tilde_.diagonal().array() += 1.0 - sc.p_g;
    } else {
        sigma_tilde_ = Eigen::MatrixXd::Identity(n, n);
    }
    sigma_factor_ = SpdFactor(sigma_tilde_);
    x_factor_ = SpdFactor(r_x_);
}

ExpectedPrecision PrecisionModel::expected_gls_precision() const {
    const auto& sc = inputs_.scenario;
    const Eigen::Index n = inputs_.locs.size();
    const Eigen::MatrixXd si_rx = sigma_factor_.solve(r_x_);
    const Eigen::VectorXd u = sigma_factor_.solve_vec(Eigen::VectorXd::Ones(n));
    ExpectedPrecision out;
    out.effective_n = si_rx.trace() - u.dot(r_x_ * u) / u.sum();
    const double dx2 = inputs_.calibration.d_x * inputs_.calibration.d_x;
    out.precision = dx2 * sc.sigma_x2 / sc.total_resid * out.effective_n;
    const auto nd = static_cast<double>(n);
    out.baseline = sc.sigma_x2 * (inputs_.calibration.applied ? nd : nd - 1.0) / sc.total_resid;
    return out;
}

double PrecisionModel::gls_precision(const Eigen::VectorXd& x) const {
    return 1.0 / (inputs_.scenario.total_resid * gls_slope_variance(x, sigma_factor_));
}

double PrecisionModel::ols_precision(const Eigen::VectorXd& x) const {
    return 1.0 / (inputs_.scenario.total_resid * ols_true_variance(x, sigma_tilde_));
}

double PrecisionModel::naive_ols_variance_ratio(const Eigen::VectorXd& x) const {
    return spatconf::naive_ols_variance_ratio(x, sigma_tilde_);
}

Eigen::VectorXd PrecisionModel::draw_x(Rng& rng) const {
    const double sd = inputs_.calibration.d_x * std::sqrt(inputs_.scenario.sigma_x2);
    return sd * x_factor_.colour(rng.normal_vector(r_x_.rows()));
}

ExpectedPrecision expected_gls_precision(const PrecisionInputs& inputs) {
    return PrecisionModel(inputs).expected_gls_precision();
}

double naive_ols_variance_ratio(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma_tilde) {
    if (sigma_tilde.rows() != x.size() || sigma_tilde.cols() != x.size())
        throw DomainError("naive_ols_variance_ratio: size mismatch");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 1e-14 * std::max(x.squaredNorm(), 1e-300)))
        throw SingularDesignError("naive_ols_variance_ratio: X is constant");
    return xc.dot(sigma_tilde * xc) / sxx;
}

MonteCarloSummary summarise(const Eigen::ArrayXd& values) {
    MonteCarloSummary s;
    s.n = static_cast<int>(values.size());
    if (s.n == 0) return s;
    s.mean = values.mean();
    if (s.n > 1) s.se = std::sqrt((values - s.mean).square().sum() / (s.n - 1.0) / s.n);
    return s;
}

MonteCarloSummary relative_gls_precision(const RelativePrecisionSpec& spec, int n_location_reps,
                                         std::uint64_t seed) {
    spec.scenario.validate();
    if (spec.n < 3) throw DomainError("relative_gls_precision: need n >= 3");
    if (n_location_reps < 1) throw DomainError("relative_gls_precision: need at least one location draw");
    PrecisionCalibration cal;
    cal.applied = spec.calibrate;
    if (spec.calibrate) {
        const auto cal_seed = derive_seed(seed, {0xca1ULL});
        cal.d_x = calibration_factor({spec.scenario.theta_x, spec.scenario.nu}, spec.n, spec.design,
                                     spec.calibration_reps, cal_seed);
        cal.d_g = calibration_factor({spec.scenario.theta_g, spec.scenario.nu}, spec.n, spec.design,
                                     spec.calibration_reps, cal_seed);
    }
    const int reps = spec.design.kind == DesignKind::Grid ? 1 : n_location_reps;
    Eigen::ArrayXd rel(reps);
    for (int r = 0; r < reps; ++r) {
        const auto locs = sample_design(spec.design, spec.n, derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        rel(r) = PrecisionModel({locs, spec.scenario, cal}).expected_gls_precision().relative();
    }
    return summarise(rel);
}

RatioSummary gls_ols_precision_ratio(const PrecisionInputs& inputs, int n_sims, std::uint64_t seed) {
    if (n_sims < 2) throw DomainError("gls_ols_precision_ratio: need at least two simulations");
    const PrecisionModel model(inputs);
    Eigen::ArrayXd ratio(n_sims);
    for (int r = 0; r < n_sims; ++r) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        const Eigen::VectorXd x = model.draw_x(rng);
        ratio(r) = model.gls_precision(x) / model.ols_precision(x);
    }
    return {summarise(ratio), summarise(ratio.log())};
}

MonteCarloSummary expected_naive_ols_variance_ratio(const PrecisionInputs& inputs, int n_sims, std::uint64_t seed) {
    if (n_sims < 2) throw DomainError("expected_naive_ols_variance_ratio: need at least two simulations");
    const PrecisionModel model(inputs);
    Eigen::ArrayXd ratio(n_sims);
    for (int r = 0; r < n_sims; ++r) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        ratio(r) = model.naive_ols_variance_ratio(model.draw_x(rng));
    }
    return summarise(ratio);
}

} // namespace spatconf
