#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace spatconf {

// Shortest decimal text that parses back to the same double; empty for NaN
// and infinities so that missing values show as empty CSV fields.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) return {};
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace spatconf
