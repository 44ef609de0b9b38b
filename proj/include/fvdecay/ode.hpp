#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

#include "fvdecay/errors.hpp"

namespace fvdecay {

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 1e-4;
    double h_max = 0.0; // 0: no cap
    std::size_t max_steps = 2'000'000;
};

/// Adaptive Dormand-Prince 5(4) integration of y' = f(t, y) from t0 until
/// t_end or until stop(t, y) returns true. observer(t, y) is invoked for
/// the initial state and after every accepted step. Returns the final
/// time.
template <std::size_t N, class F, class Observer, class Stop>
double integrate_dopri5(const F &f, double t0, std::array<double, N> &y,
                        double t_end, const OdeOptions &opt,
                        Observer &&observer, Stop &&stop) {
    using State = std::array<double, N>;
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                     a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                     a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = t0;
    double h = opt.h_init;
    if (opt.h_max > 0.0)
        h = std::min(h, opt.h_max);
    observer(t, y);
    if (stop(t, y))
        return t;
    State k1 = f(t, y);
    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        if (t >= t_end)
            return t;
        h = std::min(h, t_end - t);
        State yt;
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * a21 * k1[i];
        State k2 = f(t + c2 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        State k3 = f(t + c3 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        State k4 = f(t + c4 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                                a54 * k4[i]);
        State k5 = f(t + c5 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                a64 * k4[i] + a65 * k5[i]);
        State k6 = f(t + h, yt);
        State y_new;
        for (std::size_t i = 0; i < N; ++i)
            y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                   b5 * k5[i] + b6 * k6[i]);
        State k7 = f(t + h, y_new);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                   e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc =
                opt.abs_tol +
                opt.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / static_cast<double>(N));

        if (err <= 1.0) {
            t += h;
            y = y_new;
            k1 = k7; // first-same-as-last
            observer(t, y);
            if (stop(t, y))
                return t;
        }
        double factor = 0.9 * std::pow(err > 1e-300 ? err : 1e-300, -0.2);
        factor = std::clamp(factor, 0.2, 5.0);
        h *= factor;
        if (opt.h_max > 0.0)
            h = std::min(h, opt.h_max);
        if (!(h > 0.0) || !std::isfinite(h))
            throw ToleranceUnreachable("ODE step size underflow");
    }
    throw ToleranceUnreachable("ODE step limit reached");
}

/// Classic fixed-step RK4, recording the state at every node.
template <std::size_t N, class F, class Observer>
void integrate_rk4(const F &f, double t0, std::array<double, N> y,
                   double t_end, std::size_t n_steps, Observer &&observer) {
    const double h = (t_end - t0) / static_cast<double>(n_steps);
    double t = t0;
    observer(t, y);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const auto k1 = f(t, y);
        std::array<double, N> yt;
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + 0.5 * h * k1[i];
        const auto k2 = f(t + 0.5 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + 0.5 * h * k2[i];
        const auto k3 = f(t + 0.5 * h, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * k3[i];
        const auto k4 = f(t + h, yt);
        for (std::size_t i = 0; i < N; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = t0 + h * static_cast<double>(s + 1);
        observer(t, y);
    }
}

} // namespace fvdecay
