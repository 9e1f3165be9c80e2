#include "spatconf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "spatconf/errors.hpp"
#include "spatconf/format.hpp"
#include "spatconf/parallel.hpp"
#include "spatconf/precision.hpp"
#include "spatconf/splines.hpp"

namespace spatconf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ95 = 1.96;
constexpr std::uint64_t kCalibrationStream = 0xca1ULL;

struct NamedExperiment {
    ExperimentId id;
    const char* name;
};

constexpr NamedExperiment kExperimentNames[] = {
    {ExperimentId::BiasGrid, "bias-grid"},
    {ExperimentId::EstimatedFitGrid, "estimated-fit-grid"},
    {ExperimentId::MseCoverageGrid, "mse-coverage-grid"},
    {ExperimentId::FixedEdfGrid, "fixed-edf-grid"},
    {ExperimentId::PrecisionGrid, "precision-grid"},
};

} // namespace

std::string to_string(ExperimentId id) {
    for (const auto& e : kExperimentNames)
        if (e.id == id) return e.name;
    throw DomainError("unknown experiment id");
}

ExperimentId experiment_from_string(const std::string& name) {
    for (const auto& e : kExperimentNames)
        if (name == e.name) return e.id;
    throw DomainError("unknown experiment '" + name + "'");
}

std::vector<double> default_theta_grid() { return {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9}; }

int desk_sims(ExperimentId id) {
    switch (id) {
    case ExperimentId::BiasGrid: return 200;
    case ExperimentId::PrecisionGrid: return 50;
    default: return 200;
    }
}

int full_sims(ExperimentId id) {
    switch (id) {
    case ExperimentId::BiasGrid: return 1000;
    case ExperimentId::PrecisionGrid: return 500;
    default: return 2000;
    }
}

int ExperimentSpec::resolved_sims() const {
    if (n_sims) return *n_sims;
    if (full) return full_sims(id);
    return std::max(2, static_cast<int>(std::lround(desk_sims(id) * scale)));
}

DesignSpec ExperimentSpec::resolved_design() const {
    if (design) return *design;
    return DesignSpec{id == ExperimentId::BiasGrid ? DesignKind::Grid : DesignKind::Uniform};
}

void ExperimentSpec::validate() const {
    if (theta_row.empty() || theta_col.empty()) throw DomainError("experiment: theta grids must be non-empty");
    for (double t : theta_row) MaternSpec{t, scenario.nu}.validate();
    for (double t : theta_col) MaternSpec{t, scenario.nu}.validate();
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("experiment: scale must be a finite non-negative number");
    if (resolved_sims() < 2) throw DomainError("experiment: n_sims must be at least 2");
    if (n < 4) throw DomainError("experiment: need at least four locations");
    if (calibrate && calibration_reps < 1) throw DomainError("experiment: calibration_reps must be positive");
    if (jobs < 1) throw DomainError("experiment: jobs must be positive");
    const auto in_unit = [](const std::vector<double>& v, bool open_top, const char* what) {
        if (v.empty()) throw DomainError(std::string("experiment: ") + what + " list must be non-empty");
        for (double p : v)
            if (!(p >= 0.0 && (open_top ? p < 1.0 : p <= 1.0)))
                throw DomainError(std::string("experiment: ") + what + " out of range");
    };
    switch (id) {
    case ExperimentId::BiasGrid:
        in_unit(p_c, false, "p_c");
        in_unit(p_z, true, "p_z");
        break;
    case ExperimentId::PrecisionGrid:
        in_unit(p_g, false, "p_g");
        break;
    default: {
        ScenarioParams probe = scenario;
        probe.validate();
        if (scenario.beta_x == 0.0) throw DomainError("experiment: relative bias needs beta_x != 0");
        MaternSpec{0.5, nu_fit}.validate();
        if (id == ExperimentId::FixedEdfGrid) {
            if (edf_ladder.empty()) throw DomainError("experiment: e.d.f. ladder must be non-empty");
            for (int t : edf_ladder) {
                if (t < 5) throw DomainError("experiment: e.d.f. targets must be at least 5");
                if (t > spline_k + 2) throw DomainError("experiment: e.d.f. target exceeds spline basis");
                if (n < static_cast<Eigen::Index>(t) + 1) throw DomainError("experiment: too few locations for e.d.f. target");
            }
        }
        if (n < spline_k + 3) throw DomainError("experiment: need n >= spline_k + 3");
        break;
    }
    }
}

// ---------------------------------------------------------------------------

double GridResult::exclusion_rate() const {
    double failed = 0.0, total = 0.0;
    for (const auto& c : fit_cells) {
        failed += c.n_failed;
        total += c.n_failed + c.n_ok;
    }
    return total > 0.0 ? failed / total : 0.0;
}

const FitCellSummary& GridResult::fit(double theta_c, double theta_u, const std::string& method) const {
    for (const auto& c : fit_cells)
        if (c.theta_c == theta_c && c.theta_u == theta_u && c.method == method) return c;
    throw DomainError("grid result: no cell for method " + method);
}

const PrecisionCellSummary& GridResult::precision(double theta_x, double theta_g, double p_g,
                                                  const std::string& statistic) const {
    for (const auto& c : precision_cells)
        if (c.theta_x == theta_x && c.theta_g == theta_g && c.p_g == p_g && c.statistic == statistic) return c;
    throw DomainError("grid result: no precision cell for " + statistic);
}

const KGridCell& GridResult::bias(double theta_c, double theta_u, double p_c, double p_z) const {
    for (const auto& c : bias_cells)
        if (c.theta_c == theta_c && c.theta_u == theta_u && c.p_c == p_c && c.p_z == p_z) return c;
    throw DomainError("grid result: no bias cell");
}

// ---------------------------------------------------------------------------

namespace {

// Calibration factor per distinct range, all from the same location draws.
class CalibrationTable {
public:
    CalibrationTable(const ExperimentSpec& spec, const std::vector<double>& thetas) {
        if (!spec.calibrate) return;
        const DesignSpec design = spec.resolved_design();
        const auto seed = derive_seed(spec.seed, {kCalibrationStream});
        std::vector<double> distinct;
        for (double t : thetas)
            if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
        std::vector<double> d(distinct.size());
        parallel_for(distinct.size(), spec.jobs, [&](std::size_t i) {
            d[i] = calibration_factor(MaternSpec{distinct[i], spec.scenario.nu}, spec.n, design,
                                      spec.calibration_reps, seed);
        });
        for (std::size_t i = 0; i < distinct.size(); ++i) factors_.emplace(distinct[i], d[i]);
    }

    [[nodiscard]] double operator()(double theta) const {
        const auto it = factors_.find(theta);
        return it == factors_.end() ? 1.0 : it->second;
    }

private:
    std::map<double, double> factors_;
};

enum class FitKind { OLS, GLS, GLSK, Mixed, PenGCV, RegEdf, PenEdf };

struct MethodSpec {
    FitKind kind;
    std::string name;
    int target_edf = 0;
};

struct Outcome {
    bool ok = false;
    bool converged = true;
    double betax = kNaN;
    double se = kNaN;
    double edf = kNaN;
};

std::vector<MethodSpec> methods_for(const ExperimentSpec& spec) {
    const std::string mixed = to_string(spec.criterion == Criterion::ML ? FitMethod::ML : FitMethod::REML);
    switch (spec.id) {
    case ExperimentId::EstimatedFitGrid:
        return {{FitKind::OLS, "OLS"},
                {FitKind::GLS, "GLS"},
                {FitKind::GLSK, "GLS-k"},
                {FitKind::Mixed, mixed},
                {FitKind::PenGCV, "PenSpline"}};
    case ExperimentId::MseCoverageGrid:
        return {{FitKind::Mixed, mixed}, {FitKind::PenGCV, "PenSpline"}};
    case ExperimentId::FixedEdfGrid: {
        std::vector<MethodSpec> out;
        for (int t : spec.edf_ladder) {
            out.push_back({FitKind::RegEdf, "RegSpline-" + std::to_string(t), t});
            out.push_back({FitKind::PenEdf, "PenSpline-" + std::to_string(t), t});
        }
        return out;
    }
    default: throw DomainError("not a fit-grid experiment");
    }
}

Outcome from_fit(const FitResult& f) {
    Outcome o;
    o.ok = std::isfinite(f.betax_hat);
    o.converged = f.converged;
    o.betax = f.betax_hat;
    o.se = f.se_betax;
    if (f.edf) o.edf = *f.edf;
    return o;
}

// Runs every method on one simulated data set. Numerical failures of one
// method exclude that method only.
std::vector<Outcome> fit_replicate(const ExperimentSpec& spec, const std::vector<MethodSpec>& methods,
                                   const ScenarioParams& params, const Calibration& cal, std::size_t i,
                                   std::size_t j, std::size_t r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const LocationSet locs = sample_design(spec.resolved_design(), spec.n, derive_seed(spec.seed, {i, j, rep, 1}));
    const ScenarioSampler sampler(locs, params, cal, spec.multiscale);
    Rng rng(derive_seed(spec.seed, {i, j, rep}));
    const ConfoundedDraw draw = sampler.draw_pair(rng);
    const Eigen::VectorXd y = sampler.draw_outcome(draw.x, draw.z, rng);

    std::optional<BiasModel> bias_model;
    std::optional<SplineBasis> pen_basis;
    std::map<int, SplineBasis> reg_bases;
    std::vector<Outcome> out(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto& ms = methods[m];
        try {
            switch (ms.kind) {
            case FitKind::OLS: out[m] = from_fit(ols_fit(draw.x, y)); break;
            case FitKind::GLS:
            case FitKind::GLSK:
                if (!bias_model) bias_model.emplace(BiasInputs{locs, params, cal, spec.multiscale});
                if (ms.kind == FitKind::GLS) {
                    out[m] = from_fit(gls_fit(draw.x, y, bias_model->residual_factor()));
                } else {
                    out[m].betax = params.beta_x + bias_model->k(draw.x) * bias_model->bias_multiplier();
                    out[m].ok = std::isfinite(out[m].betax);
                }
                break;
            case FitKind::Mixed: out[m] = from_fit(mixed_fit(draw.x, y, locs, spec.nu_fit, spec.criterion)); break;
            case FitKind::PenGCV:
            case FitKind::PenEdf: {
                if (!pen_basis) pen_basis = build_tps_basis(locs, spec.spline_k);
                SmoothControl control;
                if (ms.kind == FitKind::PenEdf) {
                    control.mode = SmoothMode::FixedEDF;
                    control.target_edf = ms.target_edf;
                }
                out[m] = from_fit(partial_spline_fit(draw.x, y, *pen_basis, control));
                break;
            }
            case FitKind::RegEdf: {
                auto it = reg_bases.find(ms.target_edf);
                if (it == reg_bases.end())
                    it = reg_bases
                             .emplace(ms.target_edf,
                                      build_tps_basis(locs, regression_spline_dimension(ms.target_edf)))
                             .first;
                SmoothControl control;
                control.mode = SmoothMode::Unpenalized;
                out[m] = from_fit(partial_spline_fit(draw.x, y, it->second, control));
                break;
            }
            }
        } catch (const NumericalError&) {
            out[m] = Outcome{};
        }
    }
    return out;
}

double sd_of_mean(const Eigen::ArrayXd& v) {
    const auto n = static_cast<double>(v.size());
    if (v.size() < 2) return kNaN;
    return std::sqrt((v - v.mean()).square().sum() / (n - 1.0) / n);
}

FitCellSummary summarise_method(const std::vector<Outcome>& outcomes, const MethodSpec& ms, double beta_x) {
    FitCellSummary s;
    s.method = ms.name;
    std::vector<const Outcome*> ok;
    for (const auto& o : outcomes) {
        if (o.ok) {
            ok.push_back(&o);
            if (!o.converged) ++s.n_nonconverged;
        } else {
            ++s.n_failed;
        }
    }
    s.n_ok = static_cast<int>(ok.size());
    s.estimates.reserve(outcomes.size());
    for (const auto& o : outcomes) s.estimates.push_back(o.ok ? o.betax : kNaN);
    const Eigen::Index n = s.n_ok;
    Eigen::ArrayXd e(n), se2(n), cover(n), edf(n);
    bool has_se = true, has_edf = true;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Outcome& o = *ok[r];
        e(r) = o.betax - beta_x;
        se2(r) = o.se * o.se;
        cover(r) = std::abs(e(r)) <= kZ95 * o.se ? 1.0 : 0.0;
        edf(r) = o.edf;
        has_se = has_se && std::isfinite(o.se);
        has_edf = has_edf && std::isfinite(o.edf);
    }
    const double nan = kNaN;
    if (n == 0) {
        s.mean_betax = s.bias = s.rel_bias = s.se_rel_bias = s.variance = s.se_variance = nan;
        s.mse = s.se_mse = s.mean_se2 = s.se_mean_se2 = s.coverage = s.se_coverage = nan;
        s.mean_edf = s.se_edf = s.max_edf_dev = nan;
        return s;
    }
    s.bias = e.mean();
    s.mean_betax = beta_x + s.bias;
    s.rel_bias = s.bias / beta_x;
    s.se_rel_bias = sd_of_mean(e) / std::abs(beta_x);
    const Eigen::ArrayXd dev2 = (e - s.bias).square();
    s.variance = n > 1 ? dev2.sum() / static_cast<double>(n - 1) : nan;
    s.se_variance = sd_of_mean(dev2);
    s.mse = e.square().mean();
    s.se_mse = sd_of_mean(e.square());
    if (has_se) {
        s.mean_se2 = se2.mean();
        s.se_mean_se2 = sd_of_mean(se2);
        s.coverage = cover.mean();
        s.se_coverage = std::sqrt(s.coverage * (1.0 - s.coverage) / static_cast<double>(n));
    } else {
        s.mean_se2 = s.se_mean_se2 = s.coverage = s.se_coverage = nan;
    }
    if (has_edf) {
        s.mean_edf = edf.mean();
        s.se_edf = sd_of_mean(edf);
        s.max_edf_dev = ms.kind == FitKind::PenEdf || ms.kind == FitKind::RegEdf
                            ? (edf - static_cast<double>(ms.target_edf)).abs().maxCoeff()
                            : nan;
    } else {
        s.mean_edf = s.se_edf = s.max_edf_dev = nan;
    }
    return s;
}

GridResult run_fit_grid(const ExperimentSpec& spec) {
    spec.validate();
    const auto methods = methods_for(spec);
    const int sims = spec.resolved_sims();
    const std::size_t ncol = spec.theta_col.size();
    const std::size_t ncells = spec.theta_row.size() * ncol;

    std::vector<double> thetas = spec.theta_row;
    thetas.insert(thetas.end(), spec.theta_col.begin(), spec.theta_col.end());
    if (spec.scenario.theta_h) thetas.push_back(*spec.scenario.theta_h);
    const CalibrationTable table(spec, thetas);

    auto cell_params = [&](std::size_t cell) {
        ScenarioParams p = spec.scenario;
        p.theta_c = spec.theta_row[cell / ncol];
        p.theta_u = spec.theta_col[cell % ncol];
        return p;
    };

    const auto reps = static_cast<std::size_t>(sims);
    std::vector<std::vector<Outcome>> slots(ncells * reps);
    parallel_for(slots.size(), spec.jobs, [&](std::size_t task) {
        const std::size_t cell = task / reps;
        const std::size_t r = task % reps;
        const ScenarioParams p = cell_params(cell);
        const Calibration cal{table(p.theta_c), table(p.theta_u), table(p.range_h())};
        slots[task] = fit_replicate(spec, methods, p, cal, cell / ncol, cell % ncol, r);
    });

    GridResult result;
    result.id = spec.id;
    result.n_sims = sims;
    for (std::size_t cell = 0; cell < ncells; ++cell) {
        for (std::size_t m = 0; m < methods.size(); ++m) {
            std::vector<Outcome> per_method(reps);
            for (std::size_t r = 0; r < reps; ++r) per_method[r] = slots[cell * reps + r][m];
            FitCellSummary s = summarise_method(per_method, methods[m], spec.scenario.beta_x);
            s.theta_c = spec.theta_row[cell / ncol];
            s.theta_u = spec.theta_col[cell % ncol];
            result.fit_cells.push_back(std::move(s));
        }
    }
    return result;
}

} // namespace

GridResult run_estimated_fit_grid(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::EstimatedFitGrid) throw DomainError("run_estimated_fit_grid: wrong experiment id");
    return run_fit_grid(spec);
}

GridResult run_mse_coverage_grid(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::MseCoverageGrid) throw DomainError("run_mse_coverage_grid: wrong experiment id");
    return run_fit_grid(spec);
}

GridResult run_fixed_edf_grid(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::FixedEdfGrid) throw DomainError("run_fixed_edf_grid: wrong experiment id");
    return run_fit_grid(spec);
}

GridResult run_bias_grid(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::BiasGrid) throw DomainError("run_bias_grid: wrong experiment id");
    spec.validate();
    GridResult result;
    result.id = spec.id;
    result.n_sims = spec.resolved_sims();
    for (std::size_t a = 0; a < spec.p_c.size(); ++a) {
        for (std::size_t b = 0; b < spec.p_z.size(); ++b) {
            KGridSpec k;
            k.theta_c = spec.theta_row;
            k.theta_u = spec.theta_col;
            k.p_c = spec.p_c[a];
            k.p_z = spec.p_z[b];
            k.n = spec.n;
            k.design = spec.resolved_design();
            k.n_sims = result.n_sims;
            k.seed = derive_seed(spec.seed, {a, b});
            k.calibrate = spec.calibrate;
            k.calibration_reps = spec.calibration_reps;
            k.multiscale = spec.multiscale;
            k.nu = spec.scenario.nu;
            k.jobs = spec.jobs;
            auto cells = expected_k_grid(k);
            result.bias_cells.insert(result.bias_cells.end(), cells.begin(), cells.end());
        }
    }
    return result;
}

GridResult run_precision_grid(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::PrecisionGrid) throw DomainError("run_precision_grid: wrong experiment id");
    spec.validate();
    const int sims = spec.resolved_sims();
    const DesignSpec design = spec.resolved_design();
    std::vector<double> thetas = spec.theta_row;
    thetas.insert(thetas.end(), spec.theta_col.begin(), spec.theta_col.end());
    const CalibrationTable table(spec, thetas);

    const std::size_t ncol = spec.theta_col.size();
    const std::size_t per_panel = spec.theta_row.size() * ncol;
    const std::size_t ncells = spec.p_g.size() * per_panel;
    const auto reps = static_cast<std::size_t>(sims);

    struct Draw {
        double rel = 0.0;
        double ratio = 0.0;
        double naive = 0.0;
    };
    std::vector<Draw> slots(ncells * reps);
    parallel_for(slots.size(), spec.jobs, [&](std::size_t task) {
        const std::size_t cell = task / reps;
        const auto r = static_cast<std::uint64_t>(task % reps);
        const std::size_t g = cell / per_panel;
        const std::size_t i = (cell % per_panel) / ncol;
        const std::size_t j = cell % ncol;
        PrecisionInputs in;
        in.scenario.theta_x = spec.theta_row[i];
        in.scenario.theta_g = spec.theta_col[j];
        in.scenario.p_g = spec.p_g[g];
        in.scenario.nu = spec.scenario.nu;
        in.calibration = {table(in.scenario.theta_x), table(in.scenario.theta_g), spec.calibrate};
        in.locs = sample_design(design, spec.n, derive_seed(spec.seed, {g, i, j, r, 1}));
        const PrecisionModel model(in);
        Rng rng(derive_seed(spec.seed, {g, i, j, r}));
        const Eigen::VectorXd x = model.draw_x(rng);
        slots[task] = {model.expected_gls_precision().relative(), model.gls_precision(x) / model.ols_precision(x),
                       model.naive_ols_variance_ratio(x)};
    });

    GridResult result;
    result.id = spec.id;
    result.n_sims = sims;
    for (std::size_t cell = 0; cell < ncells; ++cell) {
        const std::size_t g = cell / per_panel;
        const std::size_t i = (cell % per_panel) / ncol;
        const std::size_t j = cell % ncol;
        Eigen::ArrayXd rel(sims), ratio(sims), naive(sims);
        for (int r = 0; r < sims; ++r) {
            const Draw& d = slots[cell * reps + static_cast<std::size_t>(r)];
            rel(r) = d.rel;
            ratio(r) = d.ratio;
            naive(r) = d.naive;
        }
        auto push = [&](const char* name, double mean, double se) {
            result.precision_cells.push_back(
                {spec.theta_row[i], spec.theta_col[j], spec.p_g[g], name, mean, se, sims});
        };
        auto push_pair = [&](const char* name, const char* log_name, const Eigen::ArrayXd& v) {
            const auto s = summarise(v);
            push(name, s.mean, s.se);
            push(log_name, std::log(s.mean), s.se / s.mean);
        };
        push_pair("rel_gls_precision", "log_rel_gls_precision", rel);
        push_pair("gls_ols_ratio", "log_gls_ols_ratio", ratio);
        const auto lr = summarise(ratio.log());
        push("mean_log_gls_ols_ratio", lr.mean, lr.se);
        push_pair("naive_ratio", "log_naive_ratio", naive);
    }
    return result;
}

GridResult run_experiment(const ExperimentSpec& spec) {
    switch (spec.id) {
    case ExperimentId::BiasGrid: return run_bias_grid(spec);
    case ExperimentId::EstimatedFitGrid: return run_estimated_fit_grid(spec);
    case ExperimentId::MseCoverageGrid: return run_mse_coverage_grid(spec);
    case ExperimentId::FixedEdfGrid: return run_fixed_edf_grid(spec);
    case ExperimentId::PrecisionGrid: return run_precision_grid(spec);
    }
    throw DomainError("unknown experiment id");
}

// ---------------------------------------------------------------------------

const char* const kFitGridHeader =
    "theta_c,theta_u,method,n_sims,n_ok,n_failed,n_nonconverged,mean_betax,bias,rel_bias,se_rel_bias,"
    "variance,se_variance,mse,se_mse,mean_se2,se_mean_se2,coverage,se_coverage,mean_edf,se_edf,max_edf_dev";

const char* const kPrecisionGridHeader = "theta_x,theta_g,p_g,statistic,mean,se,n_sims";

void write_grid_csv(std::ostream& os, const GridResult& result) {
    if (result.id == ExperimentId::BiasGrid) {
        write_k_grid_csv(os, result.bias_cells);
        return;
    }
    const auto f = [](double v) { return format_double(v); };
    if (result.id == ExperimentId::PrecisionGrid) {
        os << kPrecisionGridHeader << '\n';
        for (const auto& c : result.precision_cells)
            os << f(c.theta_x) << ',' << f(c.theta_g) << ',' << f(c.p_g) << ',' << c.statistic << ',' << f(c.mean)
               << ',' << f(c.se) << ',' << c.n_sims << '\n';
    } else {
        os << kFitGridHeader << '\n';
        for (const auto& c : result.fit_cells) {
            os << f(c.theta_c) << ',' << f(c.theta_u) << ',' << c.method << ',' << result.n_sims << ',' << c.n_ok << ','
               << c.n_failed << ',' << c.n_nonconverged;
            for (double v : {c.mean_betax, c.bias, c.rel_bias, c.se_rel_bias, c.variance, c.se_variance, c.mse,
                             c.se_mse, c.mean_se2, c.se_mean_se2, c.coverage, c.se_coverage, c.mean_edf, c.se_edf,
                             c.max_edf_dev})
                os << ',' << f(v);
            os << '\n';
        }
    }
}

} // namespace spatconf
