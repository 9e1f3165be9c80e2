#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "spatconf/config.hpp"
#include "spatconf/covariance.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/estimators.hpp"
#include "spatconf/experiments.hpp"
#include "spatconf/fields.hpp"
#include "spatconf/format.hpp"
#include "spatconf/splines.hpp"

namespace spatconf::cli {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_field(const std::string& s, std::size_t line, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("column " + column + ": '" + s + "' is not a finite number", line);
}

} // namespace

FitData read_fit_data(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw ParseError("missing header", line_no == 0 ? 1 : line_no);
    const std::size_t header_line = line_no;
    const std::array<std::string, 4> wanted = {"x", "y", "X", "Y"};
    std::array<std::size_t, 4> col{};
    for (std::size_t w = 0; w < wanted.size(); ++w) {
        const auto it = std::find(header.begin(), header.end(), wanted[w]);
        if (it == header.end()) throw ParseError("missing column '" + wanted[w] + "'", header_line);
        col[w] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<std::array<double, 4>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        std::array<double, 4> row{};
        for (std::size_t w = 0; w < wanted.size(); ++w) row[w] = parse_field(fields[col[w]], line_no, wanted[w]);
        rows.push_back(row);
    }
    if (rows.size() < 3) throw ParseError("need at least three data rows", line_no);
    const auto n = static_cast<Eigen::Index>(rows.size());
    FitData data;
    Coords c(n, 2);
    data.x.resize(n);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        c(i, 0) = r[0];
        c(i, 1) = r[1];
        data.x(i) = r[2];
        data.y(i) = r[3];
    }
    data.locs = LocationSet(std::move(c));
    return data;
}

namespace {

FitData read_fit_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read input file '" + path + "'");
    return read_fit_data(in);
}

// Output goes to the named file, or to `fallback` when the name is empty or "-".
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw IoError("cannot write '" + path + "'");
            os_ = &file_;
        }
    }
    std::ostream& stream() { return *os_; }
    void close() {
        if (file_.is_open()) {
            file_.close();
            if (!file_) throw IoError("write failed");
        }
    }

private:
    std::ofstream file_;
    std::ostream* os_;
};

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    std::string config_file;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<int> jobs;
    std::optional<double> scale;
    bool full = false;
    std::optional<int> n_sims;
    std::vector<std::string> sets;
};

int cmd_run(const RunOptions& o, std::ostream& out) {
    RunConfig config;
    if (!o.config_file.empty()) apply_settings(config, read_config_file(o.config_file));
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw DomainError("--set expects KEY=VALUE, got '" + kv + "'");
        apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.experiment.empty()) apply_setting(config, "experiment", o.experiment);
    if (o.seed) apply_setting(config, "seed", std::to_string(*o.seed));
    if (!o.out_dir.empty()) config.output_dir = o.out_dir;
    if (o.jobs) config.spec.jobs = *o.jobs;
    if (o.scale) config.spec.scale = *o.scale;
    if (o.full) config.spec.full = true;
    if (o.n_sims) config.spec.n_sims = *o.n_sims;
    if (!config.seed_given) throw DomainError("run: a seed is required (--seed or seed= in the config)");
    config.spec.validate();

    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir + "': " + ec.message());
    const std::string stem = to_string(config.spec.id);
    const auto csv_path = std::filesystem::path(config.output_dir) / (stem + ".csv");
    const auto manifest_path = std::filesystem::path(config.output_dir) / (stem + ".manifest");

    const auto start = std::chrono::steady_clock::now();
    const GridResult result = run_experiment(config.spec);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    {
        Sink csv(csv_path.string(), out);
        write_grid_csv(csv.stream(), result);
        csv.close();
    }
    {
        Sink manifest(manifest_path.string(), out);
        write_manifest(manifest.stream(), config, wall, csv_path.filename().string());
        manifest.close();
    }
    out << "wrote " << csv_path.string() << " (" << result.n_sims << " replicates per cell";
    if (!result.fit_cells.empty()) out << ", exclusion rate " << format_double(result.exclusion_rate());
    out << ")\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    std::string input;
    std::string output;
    std::vector<std::string> methods;
    double nu_fit = 2.0;
    std::optional<int> edf;
    std::optional<double> lambda;
    std::optional<int> spline_k;
    std::vector<int> ladder;
    std::optional<double> sigma_g2;
    std::optional<double> tau2;
    std::optional<double> theta_g;
};

Eigen::Index pen_basis_dim(const FitOptions& o, Eigen::Index n) {
    if (o.spline_k) return *o.spline_k;
    return std::min<Eigen::Index>(60, n - 3);
}

void require_ten(const FitData& d, const std::string& method) {
    if (d.x.size() < 10) throw DomainError(method + " needs at least ten observations");
}

FitResult fit_spline(const FitData& d, FitMethod method, const FitOptions& o, std::optional<int> target) {
    require_ten(d, to_string(method));
    if (method == FitMethod::RegSpline) {
        if (!target) throw DomainError("RegSpline needs --edf or --ladder");
        SmoothControl c;
        c.mode = SmoothMode::Unpenalized;
        return partial_spline_fit(d.x, d.y, build_tps_basis(d.locs, regression_spline_dimension(*target)), c);
    }
    SmoothControl c;
    if (target) {
        c.mode = SmoothMode::FixedEDF;
        c.target_edf = *target;
    } else if (o.lambda) {
        c.mode = SmoothMode::FixedLambda;
        c.lambda = *o.lambda;
    }
    return partial_spline_fit(d.x, d.y, build_tps_basis(d.locs, pen_basis_dim(o, d.x.size())), c);
}

FitResult fit_one(const FitData& d, FitMethod method, const FitOptions& o) {
    switch (method) {
    case FitMethod::OLS: return ols_fit(d.x, d.y);
    case FitMethod::GLS: {
        if (!o.sigma_g2 || !o.tau2 || !o.theta_g)
            throw DomainError("GLS needs --sigma-g2, --tau2 and --theta-g");
        Eigen::MatrixXd sigma = *o.sigma_g2 * correlation_from_distances(d.locs.distance_matrix(), {*o.theta_g, o.nu_fit});
        sigma.diagonal().array() += *o.tau2;
        return gls_fit(d.x, d.y, sigma);
    }
    case FitMethod::ML:
    case FitMethod::REML:
        require_ten(d, to_string(method));
        return mixed_fit(d.x, d.y, d.locs, o.nu_fit, method == FitMethod::ML ? Criterion::ML : Criterion::REML);
    case FitMethod::RegSpline:
    case FitMethod::PenSpline: return fit_spline(d, method, o, o.edf);
    }
    throw DomainError("unknown method");
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
    const FitData data = read_fit_file(o.input);
    std::vector<FitMethod> methods;
    for (const auto& m : o.methods) methods.push_back(fit_method_from_string(m));
    if (methods.empty()) methods.push_back(FitMethod::OLS);

    // Compute everything before writing so that a failure leaves no partial output.
    std::ostringstream body;
    if (!o.ladder.empty()) {
        body << "method,target_edf,edf,betax_hat,se_betax,lower,upper\n";
        for (FitMethod m : methods) {
            if (m != FitMethod::RegSpline && m != FitMethod::PenSpline)
                throw DomainError("--ladder applies to RegSpline and PenSpline only");
            for (int t : o.ladder) {
                const FitResult f = fit_spline(data, m, o, t);
                body << to_string(m) << ',' << t << ',' << format_double(f.edf.value_or(0.0)) << ','
                     << format_double(f.betax_hat) << ',' << format_double(f.se_betax) << ','
                     << format_double(f.betax_hat - 1.96 * f.se_betax) << ','
                     << format_double(f.betax_hat + 1.96 * f.se_betax) << '\n';
            }
        }
    } else {
        write_fit_csv_header(body);
        for (FitMethod m : methods) write_fit_csv_row(body, fit_one(data, m, o));
    }
    Sink sink(o.output, out);
    sink.stream() << body.str();
    sink.close();
    return kOk;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
    std::vector<double> theta;
    double nu = 2.0;
    long n = 100;
    std::string design = "uniform";
    int reps = 100;
    std::optional<std::uint64_t> seed;
    std::string locations;
};

LocationSet read_locations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read locations file '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_csv_line(line);
    }
    const auto xi = std::find(header.begin(), header.end(), "x");
    const auto yi = std::find(header.begin(), header.end(), "y");
    if (xi == header.end() || yi == header.end()) throw ParseError("missing column 'x' or 'y'", std::max<std::size_t>(line_no, 1));
    const auto cx = static_cast<std::size_t>(xi - header.begin());
    const auto cy = static_cast<std::size_t>(yi - header.begin());
    std::vector<std::array<double, 2>> pts;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw ParseError("wrong number of fields", line_no);
        pts.push_back({parse_field(f[cx], line_no, "x"), parse_field(f[cy], line_no, "y")});
    }
    if (pts.size() < 2) throw ParseError("need at least two locations", line_no);
    Coords c(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        c(static_cast<Eigen::Index>(i), 0) = pts[i][0];
        c(static_cast<Eigen::Index>(i), 1) = pts[i][1];
    }
    return LocationSet(std::move(c));
}

int cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
    std::ostringstream body;
    body << "theta,nu,d\n";
    if (!o.locations.empty()) {
        const LocationSet locs = read_locations(o.locations);
        for (double t : o.theta)
            body << format_double(t) << ',' << format_double(o.nu) << ','
                 << format_double(calibration_factor(locs, {t, o.nu})) << '\n';
    } else {
        const DesignSpec design{design_from_string(o.design)};
        if (design.kind != DesignKind::Grid && !o.seed)
            throw DomainError("calibrate: a seed is required for random designs");
        for (double t : o.theta)
            body << format_double(t) << ',' << format_double(o.nu) << ','
                 << format_double(calibration_factor({t, o.nu}, o.n, design, o.reps, o.seed.value_or(0))) << '\n';
    }
    out << body.str();
    return kOk;
}

// ---------------------------------------------------------------------------
// matern-table

struct TableOptions {
    double theta = 0.5;
    double nu = 2.0;
    double d_max = 1.5;
    int points = 31;
};

int cmd_matern_table(const TableOptions& o, std::ostream& out) {
    if (o.points < 2) throw DomainError("matern-table: need at least two points");
    if (!(o.d_max > 0.0)) throw DomainError("matern-table: d-max must be positive");
    const MaternKernel kernel({o.theta, o.nu});
    std::ostringstream body;
    body << "d,correlation\n";
    for (int i = 0; i < o.points; ++i) {
        const double d = o.d_max * i / (o.points - 1);
        body << format_double(d) << ',' << format_double(kernel(d)) << '\n';
    }
    out << body.str();
    return kOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatial confounding simulation and fitting tools", "spatconf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", library_version());

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run a simulation experiment and write CSV plus manifest");
    run_cmd->add_option("--config", run.config_file, "key=value config file (flags override it)");
    run_cmd->add_option("--experiment", run.experiment,
                        "bias-grid, estimated-fit-grid, mse-coverage-grid, fixed-edf-grid or precision-grid");
    run_cmd->add_option("--seed", run.seed, "Master seed (required here or in the config)");
    run_cmd->add_option("--out", run.out_dir, "Output directory");
    run_cmd->add_option("--jobs", run.jobs, "Worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_option("--scale", run.scale, "Replicate-count multiplier for desk-scale runs")->check(CLI::NonNegativeNumber);
    run_cmd->add_flag("--full", run.full, "Use full replicate counts");
    run_cmd->add_option("--n-sims", run.n_sims, "Replicates per cell");
    run_cmd->add_option("--set", run.sets, "Override any config key (KEY=VALUE, repeatable)");

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit Y on X for one data set (CSV with columns x, y, X, Y)");
    fit_cmd->add_option("input", fit.input, "Input CSV")->required();
    fit_cmd->add_option("--method", fit.methods, "OLS, GLS, ML, REML, RegSpline, PenSpline (repeatable)");
    fit_cmd->add_option("--out", fit.output, "Output CSV (default stdout)");
    fit_cmd->add_option("--nu", fit.nu_fit, "Matern smoothness for GLS and mixed fits");
    fit_cmd->add_option("--edf", fit.edf, "Target e.d.f. for spline fits");
    fit_cmd->add_option("--lambda", fit.lambda, "Fixed smoothing parameter for PenSpline");
    fit_cmd->add_option("--spline-k", fit.spline_k, "Penalized spline basis dimension");
    fit_cmd->add_option("--ladder", fit.ladder, "Comma-separated e.d.f. ladder for spline methods")->delimiter(',');
    fit_cmd->add_option("--sigma-g2", fit.sigma_g2, "GLS spatial variance");
    fit_cmd->add_option("--tau2", fit.tau2, "GLS nugget variance");
    fit_cmd->add_option("--theta-g", fit.theta_g, "GLS range");

    CalibrateOptions cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Print sample-variance calibration factors");
    cal_cmd->add_option("--theta", cal.theta, "Range(s), comma separated")->required()->delimiter(',');
    cal_cmd->add_option("--nu", cal.nu, "Matern smoothness");
    cal_cmd->add_option("--n", cal.n, "Number of locations");
    cal_cmd->add_option("--design", cal.design, "uniform, grid or cluster");
    cal_cmd->add_option("--reps", cal.reps, "Location draws to average over");
    cal_cmd->add_option("--seed", cal.seed, "Seed for random designs");
    cal_cmd->add_option("--locations", cal.locations, "CSV with columns x, y; overrides the design");

    TableOptions table;
    auto* table_cmd = app.add_subcommand("matern-table", "Print the Matern correlation on a distance grid");
    table_cmd->add_option("--theta", table.theta, "Range");
    table_cmd->add_option("--nu", table.nu, "Smoothness");
    table_cmd->add_option("--d-max", table.d_max, "Largest distance");
    table_cmd->add_option("--points", table.points, "Number of distances");

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("spatconf");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << library_version() << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "spatconf: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run, out);
        if (fit_cmd->parsed()) return cmd_fit(fit, out);
        if (cal_cmd->parsed()) return cmd_calibrate(cal, out);
        if (table_cmd->parsed()) return cmd_matern_table(table, out);
    } catch (const DomainError& e) {
        err << "spatconf: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        err << "spatconf: numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const IoError& e) {
        err << "spatconf: " << e.what() << '\n';
        return kIo;
    }
    return kUsage;
}

} // namespace spatconf::cli
