#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include "gradpred/errors.hpp"

namespace gradpred {

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw DataError("cannot format number");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw DataError("invalid number '" + std::string(text) + "' for " + std::string(what));
    return v;
}

}  // namespace gradpred
