#include "spatconf/bias.hpp"

#include <cmath>
#include <optional>
#include <ostream>

#include "spatconf/errors.hpp"
#include "spatconf/format.hpp"
#include "spatconf/parallel.hpp"

namespace spatconf {

double same_scale_bias(const ScenarioParams& params) {
    if (params.sigma_u2 != 0.0) throw DomainError("same_scale_bias: requires sigma_u2 = 0");
    if (!(params.sigma_c2 > 0.0)) throw DomainError("same_scale_bias: exposure variance must be positive");
    return params.rho * std::sqrt(params.sigma_z2 / params.sigma_c2) * params.beta_z;
}

namespace {

// Second GLS coefficient of v on [1 x] under the factored covariance.
double slope_projection(const SpdFactor& factor, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
    const Eigen::MatrixXd wx = factor.whiten(intercept_design(x));
    const Eigen::VectorXd wv = factor.whiten(v);
    const Eigen::Matrix2d info = wx.transpose() * wx;
    const double det = info.determinant();
    if (!(det > 1e-12 * info(0, 0) * info(1, 1))) throw SingularDesignError("k(X): design [1 X] is singular");
    const Eigen::Vector2d rhs = wx.transpose() * wv;
    return (info(0, 0) * rhs(1) - info(1, 0) * rhs(0)) / det;
}

double ols_slope_projection(const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 0.0)) throw SingularDesignError("k(X): design [1 X] is singular");
    return xc.dot(v) / sxx;
}

} // namespace

BiasModel::BiasModel(const BiasInputs& inputs) : params_(inputs.params) {
    params_.validate();
    const Eigen::Index n = inputs.locs.size();
    if (n < 3) throw DomainError("BiasModel: need at least three locations");
    const auto& cal = inputs.calibration;
    const Eigen::MatrixXd dist = inputs.locs.distance_matrix();
    const Eigen::MatrixXd r_c = correlation_from_distances(dist, params_.matern_c());
    const Eigen::MatrixXd r_u =
        params_.theta_u == params_.theta_c ? r_c : correlation_from_distances(dist, params_.matern_u());

    const Eigen::MatrixXd a = cal.d_c * cal.d_c * params_.sigma_c2 * r_c;
    b_ = cal.d_u * cal.d_u * params_.sigma_u2 * r_u;
    exposure_ = SpdFactor(a + b_);

    resid_cov_ = cal.d_c * cal.d_c * params_.beta_z * params_.beta_z * params_.sigma_z2 * r_c;
    resid_cov_.diagonal().array() += params_.tau2;
    if (inputs.multiscale && params_.sigma_h2 > 0.0) {
        const double th = params_.range_h();
        const Eigen::MatrixXd r_h = th == params_.theta_u   ? r_u
                                    : th == params_.theta_c ? r_c
                                                            : correlation_from_distances(dist, params_.matern_h());
        resid_cov_ += cal.d_h * cal.d_h * params_.sigma_h2 * r_h;
    }
    resid_ = SpdFactor(resid_cov_);
}

Eigen::VectorXd BiasModel::conditional_confounded(const Eigen::VectorXd& x) const {
    if (x.size() != exposure_.size()) throw DomainError("k(X): X length does not match the locations");
    const Eigen::VectorXd centred = x.array() - params_.mu_x;
    // A (A + B)^{-1} = I - B (A + B)^{-1}; exact when B = 0.
    if (params_.sigma_u2 == 0.0) return centred;
    return centred - b_ * exposure_.solve_vec(centred);
}

double BiasModel::k(const Eigen::VectorXd& x) const { return slope_projection(resid_, x, conditional_confounded(x)); }

double BiasModel::k_ols(const Eigen::VectorXd& x) const {
    return ols_slope_projection(x, conditional_confounded(x));
}

Eigen::VectorXd BiasModel::draw_x(Rng& rng) const {
    return (exposure_.colour(rng.normal_vector(exposure_.size())).array() + params_.mu_x).matrix();
}

double BiasModel::bias_multiplier() const {
    if (params_.sigma_c2 == 0.0) return 0.0;
    return params_.rho * std::sqrt(params_.sigma_z2 / params_.sigma_c2) * params_.beta_z;
}

double k_of_x(const Eigen::VectorXd& x, const BiasInputs& inputs) { return BiasModel(inputs).k(x); }

double ols_k_of_x(const Eigen::VectorXd& x, const BiasInputs& inputs) { return BiasModel(inputs).k_ols(x); }

ScenarioParams k_grid_params(double theta_c, double theta_u, double p_c, double p_z, bool multiscale, double nu) {
    if (!(p_c >= 0.0 && p_c <= 1.0) || !(p_z >= 0.0 && p_z < 1.0))
        throw DomainError("k grid: p_c must lie in [0, 1] and p_z in [0, 1)");
    ScenarioParams p;
    p.theta_c = theta_c;
    p.theta_u = theta_u;
    p.nu = nu;
    p.sigma_c2 = p_c;
    p.sigma_u2 = 1.0 - p_c;
    p.beta_z = std::sqrt(p_z);
    p.sigma_z2 = 1.0;
    p.tau2 = 1.0 - p_z;
    if (multiscale) {
        p.tau2 = 0.5 * (1.0 - p_z);
        p.sigma_h2 = p.tau2;
    }
    p.validate();
    return p;
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const Eigen::ArrayXd& v) {
    const auto n = static_cast<double>(v.size());
    MeanSe out;
    out.mean = v.mean();
    if (v.size() > 1) out.se = std::sqrt((v - out.mean).square().sum() / (n - 1.0) / n);
    return out;
}

Calibration fixed_calibration(const LocationSet& locs, const ScenarioParams& p) {
    return Calibration{calibration_factor(locs, p.matern_c()), calibration_factor(locs, p.matern_u()),
                       calibration_factor(locs, p.matern_h())};
}

} // namespace

std::vector<KGridCell> expected_k_grid(const KGridSpec& spec) {
    if (spec.theta_c.empty() || spec.theta_u.empty()) throw DomainError("k grid: empty range list");
    if (spec.n_sims < 2) throw DomainError("k grid: need at least two simulations per cell");
    if (spec.n < 4) throw DomainError("k grid: need at least four locations");
    const std::size_t nu_count = spec.theta_u.size();
    std::vector<KGridCell> cells(spec.theta_c.size() * nu_count);

    const bool fixed_design = spec.design.kind == DesignKind::Grid;
    const LocationSet grid = fixed_design ? sample_grid(spec.n) : LocationSet{};

    parallel_for(cells.size(), spec.jobs, [&](std::size_t idx) {
        const std::size_t i = idx / nu_count;
        const std::size_t j = idx % nu_count;
        const auto params = k_grid_params(spec.theta_c[i], spec.theta_u[j], spec.p_c, spec.p_z, spec.multiscale, spec.nu);
        Eigen::ArrayXd ks(spec.n_sims), ks_ols(spec.n_sims);

        BiasInputs inputs{grid, params, {}, spec.multiscale};
        std::optional<BiasModel> shared;
        if (fixed_design) {
            if (spec.calibrate) inputs.calibration = fixed_calibration(grid, params);
            shared.emplace(inputs);
        } else if (spec.calibrate) {
            inputs.calibration = scenario_calibration(params, spec.n, spec.design, spec.calibration_reps,
                                                      derive_seed(spec.seed, {i, j, 0xca1ULL}));
        }
        for (int r = 0; r < spec.n_sims; ++r) {
            const auto rep = static_cast<std::uint64_t>(r);
            std::optional<BiasModel> local;
            if (!fixed_design) {
                inputs.locs = sample_design(spec.design, spec.n, derive_seed(spec.seed, {i, j, rep, 1}));
                local.emplace(inputs);
            }
            const BiasModel& model = fixed_design ? *shared : *local;
            Rng rng(derive_seed(spec.seed, {i, j, rep}));
            const Eigen::VectorXd x = model.draw_x(rng);
            ks(r) = model.k(x);
            ks_ols(r) = model.k_ols(x);
        }
        const auto k = mean_se(ks);
        const auto k_ols = mean_se(ks_ols);
        cells[idx] = KGridCell{spec.theta_c[i], spec.theta_u[j], spec.p_c, spec.p_z, k.mean,
                               k.se,           k_ols.mean,       k_ols.se,  spec.n_sims};
    });
    return cells;
}

void write_k_grid_csv(std::ostream& os, const std::vector<KGridCell>& cells) {
    const auto f = [](double v) { return format_double(v); };
    os << "theta_c,theta_u,p_c,p_z,mean_k,se_k,n_sims,mean_k_ols,se_k_ols\n";
    for (const auto& c : cells) {
        os << f(c.theta_c) << ',' << f(c.theta_u) << ',' << f(c.p_c) << ',' << f(c.p_z) << ',' << f(c.mean_k) << ','
           << f(c.se_k) << ',' << c.n_sims << ',' << f(c.mean_k_ols) << ',' << f(c.se_k_ols) << '\n';
    }
}

} // namespace spatconf
