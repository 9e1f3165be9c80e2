#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spatconf/errors.hpp"
#include "spatconf/fields.hpp"
#include "spatconf/splines.hpp"

using namespace spatconf;

namespace {

Eigen::VectorXd surface(const LocationSet& locs) {
    Eigen::VectorXd v(locs.size());
    for (Eigen::Index i = 0; i < locs.size(); ++i) v(i) = std::sin(3.0 * locs.x(i)) + std::cos(2.0 * locs.y(i));
    return v;
}

SmoothControl at_lambda(double lambda) {
    SmoothControl c;
    c.mode = SmoothMode::FixedLambda;
    c.lambda = lambda;
    return c;
}

} // namespace

TEST_CASE("radial function") {
    CHECK(tps_eta(1.0) == 0.0);
    CHECK(tps_eta(0.0) == 0.0);
    CHECK(tps_eta(2.0) == doctest::Approx(4.0 * std::log(2.0)));
    CHECK(tps_eta(0.5) < 0.0);
}

TEST_CASE("basis structure") {
    const auto locs = sample_uniform(80, 3);
    const auto basis = build_tps_basis(locs, 20);
    CHECK(basis.basis_matrix.rows() == 80);
    CHECK(basis.basis_matrix.cols() == 20);
    CHECK(basis.knots.rows() == 21);
    CHECK(basis.basis_matrix.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd& p = basis.penalty_matrix;
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10 * eig.eigenvalues().maxCoeff());
    // Exactly the two linear directions are unpenalised.
    CHECK((eig.eigenvalues().array() > 1e-10 * eig.eigenvalues().maxCoeff()).count() == 18);

    // Any linear function of the coordinates lies in the penalty null space.
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(20);
    gamma(18) = 2.5;
    gamma(19) = -1.0;
    CHECK(std::abs(gamma.dot(p * gamma)) < 1e-10);

    CHECK_THROWS_AS((void)build_tps_basis(locs, 2), DomainError);
    CHECK_THROWS_AS((void)build_tps_basis(locs, 80), DomainError);
}

TEST_CASE("knot subset is space filling and deterministic") {
    const auto locs = sample_grid(100);
    const auto a = farthest_point_subset(locs, 5);
    CHECK(a == farthest_point_subset(locs, 5));
    // From the centre, the next four picks are the corners.
    for (std::size_t j = 1; j < 5; ++j) {
        const double cx = locs.x(a[j]), cy = locs.y(a[j]);
        CHECK(((cx == 0.0 || cx == 1.0) && (cy == 0.0 || cy == 1.0)));
    }
}

TEST_CASE("full-rank basis interpolates") {
    const auto locs = sample_uniform(40, 5);
    const auto basis = build_tps_basis(locs, 39);
    Eigen::MatrixXd a(40, 40);
    a.col(0).setOnes();
    a.rightCols(39) = basis.basis_matrix;
    const Eigen::VectorXd f = surface(locs);
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(f);
    CHECK((a * coef - f).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("penalty limits and e.d.f.") {
    const auto locs = sample_uniform(100, 7);
    Rng rng(8);
    const Eigen::VectorXd x = rng.normal_vector(100);
    const Eigen::VectorXd y = (0.5 * x + surface(locs)).matrix() + 0.3 * rng.normal_vector(100);
    const auto basis = build_tps_basis(locs, 10);

    SUBCASE("lambda = 0 is OLS on the augmented design") {
        Eigen::MatrixXd a(100, 12);
        a.col(0).setOnes();
        a.col(1) = x;
        a.rightCols(10) = basis.basis_matrix;
        const Eigen::VectorXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
        const Eigen::VectorXd r = y - a * beta;
        const double var = r.squaredNorm() / 88.0 * (a.transpose() * a).inverse()(1, 1);

        SmoothControl c;
        c.mode = SmoothMode::Unpenalized;
        const auto fit = partial_spline_fit(x, y, basis, c);
        CHECK(fit.method == FitMethod::RegSpline);
        CHECK(*fit.edf == doctest::Approx(12.0).epsilon(1e-12));
        CHECK(fit.betax_hat == doctest::Approx(beta(1)).epsilon(1e-9));
        CHECK(fit.beta0_hat == doctest::Approx(beta(0)).epsilon(1e-9));
        CHECK(fit.se_betax == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
        CHECK(partial_spline_fit(x, y, basis, at_lambda(0.0)).betax_hat == doctest::Approx(beta(1)).epsilon(1e-9));
    }
    SUBCASE("huge lambda leaves the linear trend surface") {
        Eigen::MatrixXd a(100, 4);
        a.col(0).setOnes();
        a.col(1) = x;
        a.rightCols(2) = locs.coords();
        const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(y);
        const auto fit = partial_spline_fit(x, y, basis, at_lambda(1e14));
        CHECK(*fit.edf == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(fit.betax_hat == doctest::Approx(beta(1)).epsilon(1e-6));
    }
    SUBCASE("penalised sandwich against dense algebra") {
        const double lambda = 0.37;
        Eigen::MatrixXd a(100, 12);
        a.col(0).setOnes();
        a.col(1) = x;
        a.rightCols(10) = basis.basis_matrix;
        Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(12, 12);
        pen.bottomRightCorner(10, 10) = basis.penalty_matrix;
        const Eigen::MatrixXd ata = a.transpose() * a;
        const Eigen::MatrixXd inv = (ata + lambda * pen).inverse();
        const Eigen::VectorXd beta = inv * a.transpose() * y;
        const Eigen::MatrixXd hat = a * inv * a.transpose();
        const double edf = hat.trace();
        const double sigma2 = (y - a * beta).squaredNorm() / (100.0 - edf);
        const double var = sigma2 * (inv * ata * inv)(1, 1);
        const auto fit = partial_spline_fit(x, y, basis, at_lambda(lambda));
        CHECK(*fit.edf == doctest::Approx(edf).epsilon(1e-9));
        CHECK(fit.betax_hat == doctest::Approx(beta(1)).epsilon(1e-8));
        CHECK(fit.se_betax == doctest::Approx(std::sqrt(var)).epsilon(1e-8));
    }
    SUBCASE("edf is non-increasing in lambda") {
        const auto big = build_tps_basis(locs, 60);
        double prev = std::numeric_limits<double>::infinity();
        for (double e = -6.0; e <= 6.0; e += 0.25) {
            const double edf = *partial_spline_fit(x, y, big, at_lambda(std::pow(10.0, e))).edf;
            CHECK(edf <= prev + 1e-12);
            prev = edf;
        }
    }
}

TEST_CASE("fixed e.d.f. mode") {
    const auto locs = sample_uniform(100, 9);
    Rng rng(10);
    const Eigen::VectorXd x = rng.normal_vector(100);
    const Eigen::VectorXd y = (0.5 * x + surface(locs)).matrix() + rng.normal_vector(100);
    const auto basis = build_tps_basis(locs, 60);
    for (double target : {4.5, 5.0, 15.0, 30.0, 61.9, 62.0}) {
        SmoothControl c;
        c.mode = SmoothMode::FixedEDF;
        c.target_edf = target;
        const auto fit = partial_spline_fit(x, y, basis, c);
        CHECK(std::abs(*fit.edf - target) <= 0.05);
        CHECK(fit.method == FitMethod::PenSpline);
    }
    SmoothControl bad;
    bad.mode = SmoothMode::FixedEDF;
    bad.target_edf = 3.5;
    CHECK_THROWS_AS((void)partial_spline_fit(x, y, basis, bad), DomainError);
    bad.target_edf = 70.0;
    CHECK_THROWS_AS((void)partial_spline_fit(x, y, basis, bad), DomainError);
    bad.target_edf.reset();
    CHECK_THROWS_AS((void)partial_spline_fit(x, y, basis, bad), DomainError);
}

TEST_CASE("rank deficiency is reported") {
    const auto locs = sample_uniform(30, 12);
    const auto basis = build_tps_basis(locs, 10);
    // X equal to a basis column makes [1 X B] singular.
    const Eigen::VectorXd x = basis.basis_matrix.col(9);
    SmoothControl c;
    c.mode = SmoothMode::Unpenalized;
    CHECK_THROWS_AS((void)partial_spline_fit(x, Eigen::VectorXd::Ones(30), basis, c), SingularDesignError);
}

TEST_CASE("gcv on pure noise picks a small e.d.f.") {
    int small = 0;
    int boundary = 0;
    constexpr int kReps = 200;
    for (int rep = 0; rep < kReps; ++rep) {
        const auto locs = sample_uniform(100, derive_seed(71, {static_cast<std::uint64_t>(rep), 0}));
        Rng rng(derive_seed(71, {static_cast<std::uint64_t>(rep), 1}));
        const Eigen::VectorXd x = rng.normal_vector(100);
        const Eigen::VectorXd y = (1.0 + 0.5 * x.array()).matrix() + rng.normal_vector(100);
        const auto fit = partial_spline_fit(x, y, build_tps_basis(locs, 60), SmoothControl{});
        // Threshold applies to the smooth term alone, without intercept and X.
        if (*fit.edf - 2.0 < 10.0) ++small;
        if (fit.at_boundary) ++boundary;
    }
    MESSAGE("edf < 10 in " << small << " of " << kReps << "; boundary minimiser in " << boundary);
    CHECK(small >= static_cast<int>(0.9 * kReps));
}

TEST_CASE("regression spline is noisier than the penalised fit at matched e.d.f.") {
    ScenarioParams sp;
    sp.theta_c = 0.7;
    sp.theta_u = 0.3;
    constexpr int kReps = 500;
    constexpr int kEdf = 15;
    const Calibration calib = scenario_calibration(sp, 100, {}, 20, 81);
    Eigen::ArrayXd reg(kReps), pen(kReps);
    for (int rep = 0; rep < kReps; ++rep) {
        const auto seed = derive_seed(82, {static_cast<std::uint64_t>(rep)});
        const auto locs = sample_uniform(100, derive_seed(seed, {0}));
        const auto draw = sample_confounded_pair(locs, sp, calib, derive_seed(seed, {1}));
        const Eigen::VectorXd y = sample_outcome(locs, draw.x, draw.z, sp, calib, derive_seed(seed, {2}), false);
        SmoothControl unpen;
        unpen.mode = SmoothMode::Unpenalized;
        reg(rep) = partial_spline_fit(draw.x, y, build_tps_basis(locs, regression_spline_dimension(kEdf)), unpen)
                       .betax_hat;
        SmoothControl fixed;
        fixed.mode = SmoothMode::FixedEDF;
        fixed.target_edf = kEdf;
        pen(rep) = partial_spline_fit(draw.x, y, build_tps_basis(locs, 60), fixed).betax_hat;
    }
    const double var_reg = (reg - reg.mean()).square().sum() / (kReps - 1);
    const double var_pen = (pen - pen.mean()).square().sum() / (kReps - 1);
    MESSAGE("var regression " << var_reg << ", var penalised " << var_pen << ", mean " << reg.mean() << " vs "
                              << pen.mean());
    CHECK(var_reg > var_pen);
    CHECK_THROWS_AS((void)regression_spline_dimension(4), DomainError);
}
