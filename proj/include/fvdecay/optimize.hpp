#pragma once

#include <cmath>
#include <utility>

namespace fvdecay {

/// Golden-section minimization of f over [a, b]; returns (x_min, f_min).
/// The bracket is assumed to contain a minimum.
template <class F>
std::pair<double, double> golden_section_min(const F &f, double a, double b,
                                             double x_tol) {
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    while (b - a > x_tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 < f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

/// Bisection root find for f with a sign change on [a, b].
template <class F>
double bisect_root(const F &f, double a, double b, double x_tol) {
    double fa = f(a);
    for (int i = 0; i < 200 && b - a > x_tol; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fa <= 0.0) == (fm <= 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

} // namespace fvdecay
