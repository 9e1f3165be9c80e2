#include "spatconf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "spatconf/errors.hpp"
#include "spatconf/format.hpp"

namespace spatconf {

std::string to_string(DesignKind kind) {
    switch (kind) {
    case DesignKind::Uniform: return "uniform";
    case DesignKind::Grid: return "grid";
    case DesignKind::Cluster: return "cluster";
    }
    return "unknown";
}

DesignKind design_from_string(const std::string& name) {
    if (name == "uniform") return DesignKind::Uniform;
    if (name == "grid") return DesignKind::Grid;
    if (name == "cluster") return DesignKind::Cluster;
    throw DomainError("unknown design '" + name + "' (expected uniform, grid or cluster)");
}

LocationSet sample_uniform(Eigen::Index n, std::uint64_t seed) {
    if (n <= 0) throw DomainError("sample_uniform: design must contain at least one location");
    Rng rng(seed);
    Coords c(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, 0) = rng.uniform();
        c(i, 1) = rng.uniform();
    }
    return LocationSet(std::move(c));
}

LocationSet sample_grid(Eigen::Index n) {
    if (n <= 0) throw DomainError("sample_grid: design must contain at least one location");
    const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (side * side != n) throw DomainError("sample_grid: n must be a perfect square, got " + std::to_string(n));
    Coords c(n, 2);
    const double step = side > 1 ? 1.0 / static_cast<double>(side - 1) : 0.0;
    for (Eigen::Index a = 0; a < side; ++a) {
        for (Eigen::Index b = 0; b < side; ++b) {
            c(a * side + b, 0) = static_cast<double>(a) * step;
            c(a * side + b, 1) = static_cast<double>(b) * step;
        }
    }
    return LocationSet(std::move(c));
}

LocationSet sample_poisson_cluster(Eigen::Index n, double mean_children, double kernel_sd, std::uint64_t seed) {
    if (n <= 0) throw DomainError("sample_poisson_cluster: design must contain at least one location");
    if (!(mean_children > 0.0)) throw DomainError("sample_poisson_cluster: mean_children must be positive");
    if (!(kernel_sd > 0.0)) throw DomainError("sample_poisson_cluster: kernel_sd must be positive");
    Rng rng(seed);
    Coords c(n, 2);
    Eigen::Index filled = 0;
    while (filled < n) {
        const double px = rng.uniform();
        const double py = rng.uniform();
        const auto children = rng.poisson(mean_children);
        for (std::uint64_t k = 0; k < children && filled < n; ++k) {
            c(filled, 0) = std::clamp(px + kernel_sd * rng.normal(), 0.0, 1.0);
            c(filled, 1) = std::clamp(py + kernel_sd * rng.normal(), 0.0, 1.0);
            ++filled;
        }
    }
    return LocationSet(std::move(c));
}

LocationSet sample_design(const DesignSpec& design, Eigen::Index n, std::uint64_t seed) {
    switch (design.kind) {
    case DesignKind::Uniform: return sample_uniform(n, seed);
    case DesignKind::Grid: return sample_grid(n);
    case DesignKind::Cluster: return sample_poisson_cluster(n, design.mean_children, design.kernel_sd, seed);
    }
    throw DomainError("unknown design");
}

CorrelatedSampler::CorrelatedSampler(const LocationSet& locs, const MaternSpec& spec)
    : CorrelatedSampler(correlation_matrix(locs, spec)) {}

CorrelatedSampler::CorrelatedSampler(const Eigen::MatrixXd& correlation)
    : corr_(correlation), factor_(correlation) {}

Eigen::VectorXd CorrelatedSampler::draw(Rng& rng) const {
    return factor_.colour(rng.normal_vector(corr_.rows()));
}

Eigen::VectorXd sample_gp(const LocationSet& locs, const FieldSpec& spec, std::uint64_t seed) {
    if (spec.variance < 0.0) throw DomainError("sample_gp: variance must be non-negative");
    const Eigen::Index n = locs.size();
    if (spec.variance == 0.0) return Eigen::VectorXd::Constant(n, spec.mean);
    const CorrelatedSampler sampler(locs, spec.matern);
    Rng rng(seed);
    return (std::sqrt(spec.effective_variance()) * sampler.draw(rng)).array() + spec.mean;
}

double sample_variance_shrinkage(const Eigen::MatrixXd& correlation) {
    const auto n = static_cast<double>(correlation.rows());
    return correlation.diagonal().sum() / n - correlation.sum() / (n * n);
}

namespace {

double factor_from_shrinkage(double mean_shrinkage) {
    if (!(mean_shrinkage > 1e-14)) {
        throw NumericalError("calibration: expected sample variance is zero (fully correlated field)");
    }
    return std::sqrt(1.0 / mean_shrinkage);
}

} // namespace

double calibration_factor(const LocationSet& locs, const MaternSpec& spec) {
    if (locs.size() < 2) throw DomainError("calibration_factor: need at least two locations");
    return factor_from_shrinkage(sample_variance_shrinkage(correlation_matrix(locs, spec)));
}

double calibration_factor(const MaternSpec& spec, Eigen::Index n, const DesignSpec& design, int n_reps,
                          std::uint64_t seed) {
    if (n < 2) throw DomainError("calibration_factor: need at least two locations");
    if (n_reps < 1) throw DomainError("calibration_factor: n_reps must be positive");
    const int reps = design.kind == DesignKind::Grid ? 1 : n_reps;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto locs = sample_design(design, n, derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        total += sample_variance_shrinkage(correlation_matrix(locs, spec));
    }
    return factor_from_shrinkage(total / reps);
}

void ScenarioParams::validate() const {
    if (sigma_c2 < 0.0 || sigma_u2 < 0.0 || sigma_z2 < 0.0 || tau2 < 0.0 || sigma_h2 < 0.0) {
        throw DomainError("scenario variances must be non-negative");
    }
    if (sigma_c2 + sigma_u2 <= 0.0) throw DomainError("scenario exposure variance must be positive");
    if (!(std::abs(rho) <= 1.0)) throw DomainError("scenario rho must lie in [-1, 1]");
    MaternSpec{theta_c, nu}.validate();
    MaternSpec{theta_u, nu}.validate();
    if (theta_h) MaternSpec{*theta_h, nu}.validate();
}

Calibration scenario_calibration(const ScenarioParams& params, Eigen::Index n, const DesignSpec& design,
                                 int n_reps, std::uint64_t seed) {
    params.validate();
    std::map<double, double> cache;
    auto factor_for = [&](double theta) {
        auto it = cache.find(theta);
        if (it != cache.end()) return it->second;
        // Same seed for every range: all factors average over the same location draws.
        const double d = calibration_factor(MaternSpec{theta, params.nu}, n, design, n_reps, seed);
        cache.emplace(theta, d);
        return d;
    };
    return Calibration{factor_for(params.theta_c), factor_for(params.theta_u), factor_for(params.range_h())};
}

ScenarioSampler::ScenarioSampler(const LocationSet& locs, const ScenarioParams& params, const Calibration& calib,
                                 bool multiscale)
    : params_(params), calib_(calib), multiscale_(multiscale), n_(locs.size()) {
    params_.validate();
    const Eigen::MatrixXd dist = locs.distance_matrix();
    sampler_c_ = CorrelatedSampler(correlation_from_distances(dist, params_.matern_c()));
    if (params_.sigma_u2 > 0.0) {
        sampler_u_ = params_.theta_u == params_.theta_c
                         ? sampler_c_
                         : CorrelatedSampler(correlation_from_distances(dist, params_.matern_u()));
    }
    if (multiscale_ && params_.sigma_h2 > 0.0) {
        const double th = params_.range_h();
        if (th == params_.theta_u && params_.sigma_u2 > 0.0) {
            sampler_h_ = sampler_u_;
        } else if (th == params_.theta_c) {
            sampler_h_ = sampler_c_;
        } else {
            sampler_h_ = CorrelatedSampler(correlation_from_distances(dist, params_.matern_h()));
        }
    }
}

ConfoundedDraw ScenarioSampler::draw_pair(Rng& rng) const {
    const Eigen::VectorXd e1 = sampler_c_.draw(rng);
    const Eigen::VectorXd e2 = sampler_c_.draw(rng);
    ConfoundedDraw out;
    out.x_c = (calib_.d_c * std::sqrt(params_.sigma_c2)) * e1;
    if (params_.sigma_u2 > 0.0) {
        out.x_u = (calib_.d_u * std::sqrt(params_.sigma_u2)) * sampler_u_.draw(rng);
    } else {
        out.x_u = Eigen::VectorXd::Zero(n_);
    }
    out.x = (out.x_c + out.x_u).array() + params_.mu_x;
    const double rho = params_.rho;
    const Eigen::VectorXd mix = rho * e1 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * e2;
    out.z = ((std::sqrt(params_.sigma_z2) * calib_.d_c) * mix).array() + params_.mu_z;
    return out;
}

Eigen::VectorXd ScenarioSampler::draw_outcome(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Rng& rng) const {
    if (x.size() != n_ || z.size() != n_) throw DomainError("sample_outcome: X and Z must match the location count");
    Eigen::VectorXd y = (params_.beta_x * x + params_.beta_z * z).array() + params_.beta0;
    if (multiscale_ && params_.sigma_h2 > 0.0) {
        y += (calib_.d_h * std::sqrt(params_.sigma_h2)) * sampler_h_.draw(rng);
    }
    if (params_.tau2 > 0.0) y += std::sqrt(params_.tau2) * rng.normal_vector(n_);
    return y;
}

ConfoundedDraw sample_confounded_pair(const LocationSet& locs, const ScenarioParams& params, const Calibration& calib,
                                      std::uint64_t seed) {
    const ScenarioSampler sampler(locs, params, calib);
    Rng rng(seed);
    return sampler.draw_pair(rng);
}

Eigen::VectorXd sample_outcome(const LocationSet& locs, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                               const ScenarioParams& params, const Calibration& calib, std::uint64_t seed,
                               bool multiscale) {
    if (multiscale && params.sigma_h2 > 0.0) {
        const ScenarioSampler sampler(locs, params, calib, true);
        Rng rng(seed);
        return sampler.draw_outcome(x, z, rng);
    }
    params.validate();
    const Eigen::Index n = locs.size();
    if (x.size() != n || z.size() != n) throw DomainError("sample_outcome: X and Z must match the location count");
    Rng rng(seed);
    Eigen::VectorXd y = (params.beta_x * x + params.beta_z * z).array() + params.beta0;
    if (params.tau2 > 0.0) y += std::sqrt(params.tau2) * rng.normal_vector(n);
    return y;
}

double sample_variance(const Eigen::VectorXd& v) {
    if (v.size() == 0) return 0.0;
    return (v.array() - v.mean()).square().mean();
}

void write_field_csv(std::ostream& os, const LocationSet& locs,
                     const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns) {
    os << "x,y";
    for (const auto& [name, values] : columns) {
        if (values.size() != locs.size()) throw DomainError("write_field_csv: column '" + name + "' has wrong length");
        os << ',' << name;
    }
    os << '\n';
    for (Eigen::Index i = 0; i < locs.size(); ++i) {
        os << format_double(locs.x(i)) << ',' << format_double(locs.y(i));
        for (const auto& col : columns) os << ',' << format_double(col.second(i));
        os << '\n';
    }
}

} // namespace spatconf
