#include "spatconf/splines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/optimize.hpp"

namespace spatconf {

double tps_eta(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

std::vector<Eigen::Index> farthest_point_subset(const LocationSet& locs, Eigen::Index m) {
    const Eigen::Index n = locs.size();
    if (m < 1 || m > n) throw DomainError("farthest_point_subset: subset size out of range");
    const Eigen::RowVector2d centroid = locs.coords().colwise().mean();
    Eigen::Index first = 0;
    (locs.coords().rowwise() - centroid).rowwise().squaredNorm().minCoeff(&first);

    std::vector<Eigen::Index> chosen{first};
    Eigen::VectorXd gap(n);
    for (Eigen::Index i = 0; i < n; ++i) gap(i) = locs.distance(i, first);
    while (static_cast<Eigen::Index>(chosen.size()) < m) {
        Eigen::Index next = 0;
        gap.maxCoeff(&next);
        chosen.push_back(next);
        for (Eigen::Index i = 0; i < n; ++i) gap(i) = std::min(gap(i), locs.distance(i, next));
    }
    return chosen;
}

SplineBasis build_tps_basis(const LocationSet& locs, Eigen::Index k) {
    const Eigen::Index n = locs.size();
    if (k < 3) throw DomainError("build_tps_basis: k must be at least 3");
    if (k > n - 1) throw DomainError("build_tps_basis: k must not exceed n - 1");

    const Eigen::Index n_knots = k + 1;
    const auto idx = farthest_point_subset(locs, n_knots);
    SplineBasis basis;
    basis.k = k;
    basis.knots.resize(n_knots, 2);
    for (Eigen::Index j = 0; j < n_knots; ++j) basis.knots.row(j) = locs.coords().row(idx[static_cast<std::size_t>(j)]);

    // Side conditions T' delta = 0 with T = [1 kx ky]; Z spans their null space.
    Eigen::MatrixXd t(n_knots, 3);
    t.col(0).setOnes();
    t.rightCols(2) = basis.knots;
    Eigen::HouseholderQR<Eigen::MatrixXd> tqr(t);
    const Eigen::Vector3d rdiag = tqr.matrixQR().diagonal().head(3).cwiseAbs();
    if (rdiag.minCoeff() <= 1e-10 * rdiag.maxCoeff()) throw DomainError("build_tps_basis: knots are collinear");
    const Eigen::MatrixXd q = tqr.householderQ();
    const Eigen::MatrixXd z = q.rightCols(n_knots - 3);

    Eigen::MatrixXd e(n, n_knots);
    for (Eigen::Index j = 0; j < n_knots; ++j)
        for (Eigen::Index i = 0; i < n; ++i) e(i, j) = tps_eta((locs.coords().row(i) - basis.knots.row(j)).norm());
    Eigen::MatrixXd omega(n_knots, n_knots);
    for (Eigen::Index j = 0; j < n_knots; ++j)
        for (Eigen::Index i = 0; i < n_knots; ++i)
            omega(i, j) = tps_eta((basis.knots.row(i) - basis.knots.row(j)).norm());

    const Eigen::Index n_radial = k - SplineBasis::kNullDim;
    basis.basis_matrix.resize(n, k);
    basis.basis_matrix.leftCols(n_radial) = e * z;
    basis.basis_matrix.rightCols(2) = locs.coords();
    basis.basis_matrix.rowwise() -= basis.basis_matrix.colwise().mean();

    basis.penalty_matrix = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd pen = z.transpose() * omega * z;
    basis.penalty_matrix.topLeftCorner(n_radial, n_radial) = 0.5 * (pen + pen.transpose());
    return basis;
}

Eigen::Index regression_spline_dimension(int target_edf) {
    if (target_edf < 5) throw DomainError("regression spline e.d.f. must be at least 5");
    return target_edf - 2;
}

namespace {

// Demmler-Reinsch form of the penalised problem: with A = Q Rt and
// Rt^{-T} P Rt^{-1} = U diag(d) U', the fit at lambda shrinks the rotated
// coefficients c = U' Q' y by s_i = 1 / (1 + lambda d_i).
class PenalisedProblem {
public:
    PenalisedProblem(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SplineBasis& basis) {
        const Eigen::Index n = y.size();
        const Eigen::Index k = basis.k;
        p_ = k + 2;
        n_ = static_cast<double>(n);
        Eigen::MatrixXd a(n, p_);
        a.col(0).setOnes();
        a.col(1) = x;
        a.rightCols(k) = basis.basis_matrix;

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(1e-10);
        if (qr.rank() < p_) throw SingularDesignError("spline design [1 X B] is rank deficient");
        // A P = Q R, so A = Q Rt with Rt = R P'.
        const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p_, p_).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd rt = r * qr.colsPermutation().transpose();
        const Eigen::MatrixXd rt_inv = rt.inverse();

        Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(p_, p_);
        pen.bottomRightCorner(k, k) = basis.penalty_matrix;
        Eigen::MatrixXd m = rt_inv.transpose() * pen * rt_inv;
        m = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        d_ = eig.eigenvalues().cwiseMax(0.0);
        const double dmax = d_.maxCoeff();
        for (Eigen::Index i = 0; i < p_; ++i)
            if (d_(i) < 1e-12 * dmax) d_(i) = 0.0;
        w_ = rt_inv * eig.eigenvectors();

        const Eigen::VectorXd qty = qr.householderQ().transpose() * y;
        c_ = eig.eigenvectors().transpose() * qty.head(p_);
        rss_outside_ = qty.tail(n - p_).squaredNorm();
    }

    [[nodiscard]] Eigen::Index params() const { return p_; }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return d_; }
    [[nodiscard]] Eigen::Index penalised_directions() const { return (d_.array() > 0.0).count(); }

    [[nodiscard]] Eigen::ArrayXd shrink(double lambda) const { return 1.0 / (1.0 + lambda * d_.array()); }
    [[nodiscard]] double edf(double lambda) const { return shrink(lambda).sum(); }
    [[nodiscard]] double rss(double lambda) const {
        const Eigen::ArrayXd s = shrink(lambda);
        return rss_outside_ + ((1.0 - s) * c_.array()).square().sum();
    }
    [[nodiscard]] double gcv(double lambda) const {
        const double resid_df = n_ - edf(lambda);
        return n_ * rss(lambda) / (resid_df * resid_df);
    }

    [[nodiscard]] FitResult fit(double lambda) const {
        const Eigen::ArrayXd s = shrink(lambda);
        const Eigen::VectorXd beta = w_ * (s * c_.array()).matrix();
        const double edf_value = s.sum();
        const double resid_df = n_ - edf_value;
        FitResult out;
        out.beta0_hat = beta(0);
        out.betax_hat = beta(1);
        out.edf = edf_value;
        out.lambda = lambda;
        if (resid_df > 1e-8) {
            const double sigma2 = rss(lambda) / resid_df;
            out.se_betax = std::sqrt(sigma2 * (w_.row(1).array().transpose() * s).square().sum());
        } else {
            out.se_betax = std::numeric_limits<double>::quiet_NaN();
        }
        return out;
    }

private:
    Eigen::Index p_ = 0;
    double n_ = 0.0;
    Eigen::VectorXd d_;
    Eigen::MatrixXd w_;
    Eigen::VectorXd c_;
    double rss_outside_ = 0.0;
};

} // namespace

FitResult partial_spline_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SplineBasis& basis,
                             const SmoothControl& control) {
    if (x.size() != y.size()) throw DomainError("X and Y lengths differ");
    if (basis.basis_matrix.rows() != y.size()) throw DomainError("spline basis does not match the data length");
    if (y.size() < basis.k + 3) throw DomainError("spline fit needs n >= k + 3");
    const PenalisedProblem prob(x, y, basis);

    FitResult out;
    bool at_boundary = false;
    switch (control.mode) {
    case SmoothMode::Unpenalized:
        out = prob.fit(0.0);
        out.method = FitMethod::RegSpline;
        return out;
    case SmoothMode::FixedLambda: {
        if (!control.lambda || !(*control.lambda >= 0.0)) throw DomainError("FixedLambda mode needs lambda >= 0");
        out = prob.fit(*control.lambda);
        break;
    }
    case SmoothMode::FixedEDF: {
        if (!control.target_edf) throw DomainError("FixedEDF mode needs a target e.d.f.");
        const double target = *control.target_edf;
        const auto p = static_cast<double>(prob.params());
        const auto floor_edf = p - static_cast<double>(prob.penalised_directions());
        if (!(target > floor_edf && target <= p))
            throw DomainError("target e.d.f. must lie in (" + std::to_string(floor_edf) + ", " +
                              std::to_string(p) + "]");
        if (target >= p - 1e-12) {
            out = prob.fit(0.0);
            break;
        }
        const auto& d = prob.eigenvalues();
        const double dmax = d.maxCoeff();
        const double dmin = (d.array() > 0.0).select(d.array(), dmax).minCoeff();
        double lo = std::log(1e-10 / dmax);
        double hi = std::log(1e10 / dmin);
        auto excess = [&](double log_lambda) { return prob.edf(std::exp(log_lambda)) - target; };
        while (excess(hi) > 0.0) hi += 5.0;
        while (excess(lo) < 0.0) lo -= 5.0;
        out = prob.fit(std::exp(bisect(excess, lo, hi, 1e-12)));
        break;
    }
    case SmoothMode::GCV: {
        if (!(control.lambda_min > 0.0 && control.lambda_max > control.lambda_min && control.grid_points >= 3))
            throw DomainError("invalid GCV search range");
        const double a = std::log(control.lambda_min);
        const double b = std::log(control.lambda_max);
        const double step = (b - a) / (control.grid_points - 1);
        auto score = [&](double log_lambda) { return prob.gcv(std::exp(log_lambda)); };
        int best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (int i = 0; i < control.grid_points; ++i) {
            const double v = score(a + step * i);
            if (v < best_score) {
                best_score = v;
                best = i;
            }
        }
        at_boundary = best == 0 || best == control.grid_points - 1;
        double log_lambda = a + step * best;
        if (!at_boundary) {
            const auto m = golden_section(score, log_lambda - step, log_lambda + step, 1e-6);
            if (m.value < best_score) log_lambda = m.x;
        }
        out = prob.fit(std::exp(log_lambda));
        break;
    }
    }
    out.method = FitMethod::PenSpline;
    out.at_boundary = at_boundary;
    return out;
}

} // namespace spatconf
