#ifndef ADPREDICT_DATE_HPP
#define ADPREDICT_DATE_HPP

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "adpredict/error.hpp"

namespace adpredict {

/// Calendar date with day resolution, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;

    static Date from_days(int days) {
        Date d;
        d.days_ = days;
        return d;
    }

    static Date ymd(int year, unsigned month, unsigned day) {
        using namespace std::chrono;
        const year_month_day v{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
        if (!v.ok()) {
            throw ArgumentError("invalid calendar date " + std::to_string(year) + "-" +
                                std::to_string(month) + "-" + std::to_string(day));
        }
        return from_days(static_cast<int>(sys_days{v}.time_since_epoch().count()));
    }

    /// Parses YYYY-MM-DD.
    static Date parse(std::string_view text) {
        int y = 0;
        unsigned m = 0, d = 0;
        const std::string s(text);
        char tail = 0;
        if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
            throw DataError("malformed date '" + s + "' (expected YYYY-MM-DD)");
        }
        try {
            return ymd(y, m, d);
        } catch (const ArgumentError& e) {
            throw DataError(e.what());
        }
    }

    int days() const noexcept { return days_; }

    std::chrono::year_month_day calendar() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }

    int year() const { return static_cast<int>(calendar().year()); }
    unsigned month() const { return static_cast<unsigned>(calendar().month()); }
    unsigned day() const { return static_cast<unsigned>(calendar().day()); }

    /// Shifts by whole calendar years; Feb 29 maps to Feb 28 in non-leap targets.
    Date plus_years(int years) const {
        using namespace std::chrono;
        auto v = calendar();
        year_month_day shifted = v + std::chrono::years{years};
        if (!shifted.ok()) {
            shifted = year_month_day{shifted.year(), shifted.month(), std::chrono::day{28}};
        }
        return from_days(static_cast<int>(sys_days{shifted}.time_since_epoch().count()));
    }

    Date plus_days(int n) const { return from_days(days_ + n); }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;
    friend constexpr bool operator==(const Date&, const Date&) = default;

private:
    int days_ = 0;
};

/// Completed whole years from `from` to `to` (age in years when `from` is a birth date).
inline int whole_years_between(Date from, Date to) {
    int years = to.year() - from.year();
    if (years > 0 && from.plus_years(years) > to) {
        --years;
    } else if (years < 0 && from.plus_years(years) < to) {
        ++years;
    }
    return years;
}

/// Fractional years between two dates using a 365.25-day year.
inline double years_between(Date from, Date to) {
    return static_cast<double>(to.days() - from.days()) / 365.25;
}

}  // namespace adpredict

#endif  // ADPREDICT_DATE_HPP
