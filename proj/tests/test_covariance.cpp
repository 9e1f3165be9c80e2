#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "spatconf/covariance.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/fields.hpp"
#include "spatconf/linalg.hpp"

using namespace spatconf;

namespace {

struct BesselRef {
    double order;
    double x;
    double value;
};

constexpr BesselRef kBesselTable[] = {
#include "oracles/bessel_table.inc"
};

constexpr double kMaternNu2Theta05D03 = 0.59594923575087230471;

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

} // namespace

TEST_CASE("bessel_k matches arbitrary-precision reference values") {
    double worst = 0.0;
    for (const auto& ref : kBesselTable) {
        const double got = bessel_k(ref.order, ref.x);
        const double err = rel_err(got, ref.value);
        worst = std::max(worst, err);
        INFO("order=" << ref.order << " x=" << ref.x << " got=" << got << " want=" << ref.value);
        CHECK(err <= 1e-10);
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("bessel_k closed forms") {
    CHECK(bessel_k(0.5, 2.0) == doctest::Approx(std::sqrt(std::numbers::pi / 4.0) * std::exp(-2.0)).epsilon(1e-14));
    CHECK(bessel_k(0.5, 2.0) == doctest::Approx(0.11993777).epsilon(1e-7));
    CHECK(bessel_k(1.5, 1.0) ==
          doctest::Approx(std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0) * 2.0).epsilon(1e-14));
    CHECK(bessel_k(-2.0, 1.3) == bessel_k(2.0, 1.3));
}

TEST_CASE("bessel_k errors") {
    CHECK_THROWS_AS((void)bessel_k(1.0, 0.0), DomainError);
    CHECK_THROWS_AS((void)bessel_k(1.0, -1.0), DomainError);
    CHECK_THROWS_AS((void)bessel_k(0.3, 1.0), UnsupportedOrderError);
    CHECK_THROWS_AS((void)bessel_k(1.25, 1.0), UnsupportedOrderError);
}

TEST_CASE("bessel_k three-term recurrence") {
    for (double nu : {0.5, 1.0, 1.5, 2.0, 2.5}) {
        for (double x = 1e-3; x < 50.0; x *= 1.7) {
            const double lhs = bessel_k(nu + 1.0, x);
            const double rhs = bessel_k(nu - 1.0, x) + (2.0 * nu / x) * bessel_k(nu, x);
            INFO("nu=" << nu << " x=" << x);
            CHECK(rel_err(lhs, rhs) <= 1e-9);
        }
    }
}

TEST_CASE("matern basic values") {
    CHECK(matern(0.0, {0.3, 2.0}) == 1.0);
    CHECK(matern(0.0, {0.3, 0.5}) == 1.0);
    CHECK(matern(1.0, {1.0, 0.5}) == doctest::Approx(std::exp(-std::sqrt(2.0))).epsilon(1e-14));
    CHECK(matern(1.0, {1.0, 0.5}) == doctest::Approx(0.2431167).epsilon(1e-7));
    CHECK(rel_err(matern(0.3, {0.5, 2.0}), kMaternNu2Theta05D03) <= 1e-12);
    CHECK_THROWS_AS((void)matern(-1.0, {0.5, 2.0}), DomainError);
    CHECK_THROWS_AS((void)matern(0.1, {0.0, 2.0}), DomainError);
    CHECK_THROWS_AS((void)matern(0.1, {0.5, 0.7}), UnsupportedOrderError);
}

TEST_CASE("matern exponential special case") {
    for (double theta : {0.1, 0.5, 0.9}) {
        for (double d = 0.0; d <= 5.0; d += 0.01) {
            CHECK(std::abs(matern(d, {theta, 0.5}) - std::exp(-std::sqrt(2.0) * d / theta)) <= 1e-12);
        }
    }
}

TEST_CASE("matern monotonicity") {
    for (double nu : {0.5, 1.0, 1.5, 2.0}) {
        double prev = 1.0;
        for (double d = 0.01; d <= 3.0; d += 0.01) {
            const double r = matern(d, {0.5, nu});
            CHECK(r < prev);
            CHECK(r >= 0.0);
            prev = r;
        }
        CHECK(matern(200.0, {0.5, nu}) < 1e-100);
        for (double d : {0.05, 0.3, 1.0}) {
            double prev_theta = 0.0;
            for (double theta = 0.05; theta <= 1.5; theta += 0.05) {
                const double r = matern(d, {theta, nu});
                CHECK(r > prev_theta);
                prev_theta = r;
            }
        }
    }
}

TEST_CASE("matern near zero distance is continuous") {
    const MaternSpec spec{0.5, 2.0};
    CHECK(matern(1e-12, spec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(matern(1e-200, spec) == 1.0);
    CHECK(matern(1e-6, {0.5, 1.0}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("correlation_matrix structure") {
    SUBCASE("coincident locations") {
        Coords c(2, 2);
        c << 0.3, 0.4, 0.3, 0.4;
        const auto r = correlation_matrix(LocationSet(c), {0.5, 2.0});
        CHECK(r.isApprox(Eigen::MatrixXd::Ones(2, 2)));
    }
    SUBCASE("vanishing range gives identity") {
        const auto locs = sample_uniform(30, 11);
        const auto r = correlation_matrix(locs, {1e-8, 2.0});
        CHECK((r - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("entrywise agreement with scalar kernel") {
        const auto locs = sample_uniform(3, 5);
        const MaternSpec spec{0.5, 2.0};
        const auto r = correlation_matrix(locs, spec);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double d = std::hypot(locs.x(i) - locs.x(j), locs.y(i) - locs.y(j));
                CHECK(r(i, j) == doctest::Approx(matern(d, spec)).epsilon(1e-15));
            }
        }
        CHECK(r.isApprox(r.transpose()));
        CHECK(r.diagonal().isOnes());
        CHECK(r.minCoeff() >= 0.0);
        CHECK(r.maxCoeff() <= 1.0);
    }
}

TEST_CASE("correlation matrices factorize with small jitter") {
    for (Eigen::Index n : {25, 100, 400}) {
        const auto locs = sample_uniform(n, 100 + static_cast<std::uint64_t>(n));
        for (double theta : {0.05, 0.3, 0.9}) {
            for (double nu : {0.5, 2.0}) {
                const SpdFactor f(correlation_matrix(locs, {theta, nu}));
                INFO("n=" << n << " theta=" << theta << " nu=" << nu << " jitter=" << f.jitter());
                CHECK(f.jitter() <= 1e-8);
            }
        }
    }
}

TEST_CASE("SpdFactor errors and log determinant") {
    Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(SpdFactor{neg}, NumericalError);
    Eigen::MatrixXd a(2, 2);
    a << 4.0, 1.0, 1.0, 3.0;
    const SpdFactor f(a);
    CHECK(f.jitter() == 0.0);
    CHECK(f.log_det() == doctest::Approx(std::log(11.0)));
}
