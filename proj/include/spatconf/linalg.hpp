#pragma once

#include <Eigen/Dense>

namespace spatconf {

// Jitter ladder for near-singular covariance matrices. Jitter is relative to
// the mean diagonal, so for correlation matrices it is an absolute amount.
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

// Cholesky factor of a symmetric positive (semi)definite matrix with the
// jitter escalation policy applied: try as-is, then 1e-10, 1e-9, ..., 1e-6.
// Throws NumericalError if every rung fails.
class SpdFactor {
public:
    SpdFactor() = default;
    explicit SpdFactor(const Eigen::MatrixXd& a);

    [[nodiscard]] Eigen::Index size() const { return llt_.rows(); }
    // Absolute jitter that was added to the diagonal (0 when none was needed).
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] Eigen::MatrixXd lower() const { return llt_.matrixL(); }

    template <typename Rhs>
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixBase<Rhs>& b) const {
        return llt_.solve(b);
    }
    [[nodiscard]] Eigen::VectorXd solve_vec(const Eigen::VectorXd& b) const { return llt_.solve(b); }

    // L^{-1} b, for whitening.
    [[nodiscard]] Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const {
        return llt_.matrixL().solve(b);
    }
    // L w, for colouring i.i.d. draws.
    [[nodiscard]] Eigen::VectorXd colour(const Eigen::VectorXd& w) const {
        return llt_.matrixL() * w;
    }

    [[nodiscard]] double log_det() const;

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double jitter_ = 0.0;
};

// Design matrix [1 X].
[[nodiscard]] Eigen::MatrixXd intercept_design(const Eigen::VectorXd& x);

} // namespace spatconf
