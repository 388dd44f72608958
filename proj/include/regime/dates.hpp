#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace regime {

// Calendar dates are stored as days since 1970-01-01 (civil calendar).
using Date = std::int32_t;

struct CivilDate {
    int year;
    int month;  // 1..12
    int day;    // 1..31
};

// Howard Hinnant's civil-calendar algorithms.
inline Date days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

inline CivilDate civil_from_days(Date z) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
    return lengths[m - 1];
}

// Calendar month shift, clamping the day-of-month (Aug 31 + 6mo -> Feb 28/29).
inline Date add_months(Date date, int months) {
    CivilDate c = civil_from_days(date);
    int m0 = c.year * 12 + (c.month - 1) + months;
    int y = m0 / 12, m = m0 % 12;
    if (m < 0) { m += 12; --y; }
    ++m;
    int d = c.day;
    int dim = days_in_month(y, m);
    if (d > dim) d = dim;
    return days_from_civil(y, m, d);
}

inline Date add_years(Date date, int years) { return add_months(date, 12 * years); }

inline Date parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw std::invalid_argument("bad date (expected YYYY-MM-DD): " + s);
    int y = std::stoi(s.substr(0, 4));
    int m = std::stoi(s.substr(5, 2));
    int d = std::stoi(s.substr(8, 2));
    if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m))
        throw std::invalid_argument("bad date: " + s);
    return days_from_civil(y, m, d);
}

inline std::string format_date(Date date) {
    CivilDate c = civil_from_days(date);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

}  // namespace regime
