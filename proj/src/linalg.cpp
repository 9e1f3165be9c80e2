#include "spatconf/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "spatconf/errors.hpp"

namespace spatconf {

SpdFactor::SpdFactor(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DomainError("SpdFactor: matrix is not square");
    if (a.rows() == 0) throw DomainError("SpdFactor: empty matrix");
    llt_.compute(a);
    if (llt_.info() == Eigen::Success) return;

    const double scale = std::max(a.diagonal().mean(), 0.0);
    if (!(scale > 0.0)) throw NumericalError("SpdFactor: matrix has non-positive diagonal");
    for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-9); rel *= 10.0) {
        Eigen::MatrixXd jittered = a;
        jittered.diagonal().array() += rel * scale;
        llt_.compute(jittered);
        if (llt_.info() == Eigen::Success) {
            jitter_ = rel * scale;
            return;
        }
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation to 1e-6");
}

double SpdFactor::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd intercept_design(const Eigen::VectorXd& x) {
    Eigen::MatrixXd d(x.size(), 2);
    d.col(0).setOnes();
    d.col(1) = x;
    return d;
}

} // namespace spatconf
