#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "fvdecay/errors.hpp"

namespace fvdecay {
namespace detail {

// Gauss-Kronrod 7-15 pair on [-1, 1]. Nodes are symmetric; only the
// non-negative half is stored.
struct Gk15 {
    static constexpr double xk[8] = {
        0.991455371120813, 0.949107912342759, 0.864864423359769,
        0.741531185599394, 0.586087235467691, 0.405845151377397,
        0.207784955007898, 0.000000000000000};
    static constexpr double wk[8] = {
        0.022935322010529, 0.063092092629979, 0.104790010322250,
        0.140653259715525, 0.169004726639267, 0.190350578064785,
        0.204432940075298, 0.209482141084728};
    // Gauss weights attach to xk[1], xk[3], xk[5], xk[7].
    static constexpr double wg[4] = {0.129484966168870, 0.279705391489277,
                                     0.381830050505119, 0.417959183673469};
};

struct GkResult {
    double integral;   // Kronrod estimate
    double error;      // |K15 - G7| based estimate
    double abs_integral; // integral of |f|, for scaling
};

template <class F> GkResult gk15(const F &f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * Gk15::xk[i]);
        fv[14 - i] = f(c + h * Gk15::xk[i]);
    }
    fv[7] = f(c);
    double rk = 0, ra = 0;
    for (int i = 0; i < 8; ++i) {
        const double w = Gk15::wk[i];
        if (i == 7) {
            rk += w * fv[7];
            ra += w * std::abs(fv[7]);
        } else {
            rk += w * (fv[i] + fv[14 - i]);
            ra += w * (std::abs(fv[i]) + std::abs(fv[14 - i]));
        }
    }
    double rg = Gk15::wg[3] * fv[7];
    for (int j = 0; j < 3; ++j)
        rg += Gk15::wg[j] * (fv[2 * j + 1] + fv[13 - 2 * j]);
    const double diff = std::abs(rk - rg) * h;
    return {rk * h, std::min(diff, std::pow(200.0 * diff, 1.5)), ra * h};
}

struct Interval {
    double a, b, integral, error, abs_integral;
    bool operator<(const Interval &o) const { return error < o.error; }
};

} // namespace detail

/// Adaptive quadrature of f over [a, b] with an embedded-rule error
/// estimate. Converges when the accumulated error estimate drops below
/// rel_tol relative to the integral (with a floor tied to the integral of
/// |f| so near-cancelling integrands do not over-refine). An integral
/// whose whole magnitude stays below `abs_negligible` is accepted as is;
/// without such a floor an integrand made of rounding noise around zero
/// can never satisfy a relative tolerance.
/// Throws QuadratureNonConvergent when the subdivision limit is reached.
template <class F>
double integrate_adaptive(const F &f, double a, double b, double rel_tol,
                          std::size_t max_intervals = 4000,
                          double abs_negligible = 0.0) {
    if (a == b)
        return 0.0;
    std::priority_queue<detail::Interval> queue;
    auto r0 = detail::gk15(f, a, b);
    queue.push({a, b, r0.integral, r0.error, r0.abs_integral});
    double total = r0.integral, total_err = r0.error, total_abs = r0.abs_integral;
    std::size_t n_intervals = 1;
    auto tolerance = [&] {
        return rel_tol * std::max(std::abs(total), 1e-3 * total_abs);
    };
    while (total_err > tolerance() && total_err > 1e-300) {
        if (std::abs(total) + total_err <= abs_negligible)
            return total;
        if (n_intervals >= max_intervals)
            throw QuadratureNonConvergent(
                "adaptive quadrature: refinement limit reached (err=" +
                std::to_string(total_err) + ")");
        const detail::Interval worst = queue.top();
        queue.pop();
        const double m = 0.5 * (worst.a + worst.b);
        auto rl = detail::gk15(f, worst.a, m);
        auto rr = detail::gk15(f, m, worst.b);
        total += rl.integral + rr.integral - worst.integral;
        total_err += rl.error + rr.error - worst.error;
        total_abs += rl.abs_integral + rr.abs_integral - worst.abs_integral;
        queue.push({worst.a, m, rl.integral, rl.error, rl.abs_integral});
        queue.push({m, worst.b, rr.integral, rr.error, rr.abs_integral});
        ++n_intervals;
    }
    return total;
}

} // namespace fvdecay
