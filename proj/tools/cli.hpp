#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatconf/locations.hpp"

namespace spatconf::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct FitData {
    LocationSet locs;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
};

// CSV with a header naming at least the columns x, y, X and Y (any order,
// extra columns ignored). Errors are ParseErrors carrying the line number.
[[nodiscard]] FitData read_fit_data(std::istream& is);

} // namespace spatconf::cli
