#pragma once

#include <Eigen/Dense>

namespace spatconf {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// n planar locations. Designs in this library place them in the unit square,
// which is treated as flat (plain Euclidean distance, no wrapping).
class LocationSet {
public:
    LocationSet() = default;
    explicit LocationSet(Coords coords) : coords_(std::move(coords)) {}

    [[nodiscard]] Eigen::Index size() const { return coords_.rows(); }
    [[nodiscard]] const Coords& coords() const { return coords_; }
    [[nodiscard]] double x(Eigen::Index i) const { return coords_(i, 0); }
    [[nodiscard]] double y(Eigen::Index i) const { return coords_(i, 1); }

    [[nodiscard]] double distance(Eigen::Index i, Eigen::Index j) const {
        return (coords_.row(i) - coords_.row(j)).norm();
    }

    [[nodiscard]] Eigen::MatrixXd distance_matrix() const {
        const Eigen::Index n = size();
        Eigen::MatrixXd d(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            d(j, j) = 0.0;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                d(i, j) = distance(i, j);
                d(j, i) = d(i, j);
            }
        }
        return d;
    }

private:
    Coords coords_;
};

} // namespace spatconf
