#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace fvdecay {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    if (n == 1) {
        x[0] = lo;
        return x;
    }
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = lo + h * static_cast<double>(i);
    x.back() = hi;
    return x;
}

inline double sqr(double x) { return x * x; }

/// Full-precision scientific formatting (17 significant digits),
/// locale-independent so emitted files diff cleanly across runs.
inline std::string format_full(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v,
                             std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

/// Least-squares slope of y against x over [first, last).
inline double lsq_slope(const std::vector<double> &x,
                        const std::vector<double> &y, std::size_t first,
                        std::size_t last) {
    const auto n = static_cast<double>(last - first);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < last; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0)
        return 0.0;
    return (n * sxy - sx * sy) / denom;
}

inline double mean(const std::vector<double> &v, std::size_t first,
                   std::size_t last) {
    double s = 0;
    for (std::size_t i = first; i < last; ++i)
        s += v[i];
    return s / static_cast<double>(last - first);
}

inline double stddev(const std::vector<double> &v, std::size_t first,
                     std::size_t last) {
    const double m = mean(v, first, last);
    double s = 0;
    for (std::size_t i = first; i < last; ++i)
        s += (v[i] - m) * (v[i] - m);
    return std::sqrt(s / static_cast<double>(last - first));
}

} // namespace fvdecay
