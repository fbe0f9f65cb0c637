#pragma once

#include <chrono>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

#include "gradpred/errors.hpp"

namespace gradpred {

/// Calendar date. Arithmetic that lands on a nonexistent day (Feb 29 in a
/// non-leap year, the 31st of a short month) clamps to the month's last day.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : ymd_(std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}) {}

    /// Strict YYYY-MM-DD.
    static Date parse(std::string_view text) {
        auto fail = [&]() -> DataError {
            return DataError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
        };
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
        auto field = [&](std::size_t pos, std::size_t len) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
            if (ec != std::errc{} || ptr != text.data() + pos + len) throw fail();
            return v;
        };
        Date d(field(0, 4), static_cast<unsigned>(field(5, 2)), static_cast<unsigned>(field(8, 2)));
        if (!d.ymd_.ok()) throw fail();
        return d;
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    int year() const { return static_cast<int>(ymd_.year()); }
    unsigned month() const { return static_cast<unsigned>(ymd_.month()); }
    unsigned day() const { return static_cast<unsigned>(ymd_.day()); }

    std::chrono::sys_days days() const { return std::chrono::sys_days{ymd_}; }

    Date add_years(int n) const { return add_months(12 * n); }

    Date add_months(int n) const {
        using namespace std::chrono;
        year_month ym = year_month{ymd_.year(), ymd_.month()} + months{n};
        auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
        auto d = ymd_.day() > last ? last : ymd_.day();
        return Date(year_month_day{ym.year(), ym.month(), d});
    }

    Date add_days(int n) const {
        return Date(std::chrono::year_month_day{days() + std::chrono::days{n}});
    }

    /// Signed day count from this date to `other`.
    long days_until(const Date& other) const { return (other.days() - days()).count(); }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::January, std::chrono::day{1}};
};

}  // namespace gradpred
