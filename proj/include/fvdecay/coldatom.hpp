#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "fvdecay/errors.hpp"
#include "fvdecay/instanton.hpp"
#include "fvdecay/interp.hpp"
#include "fvdecay/parallel.hpp"
#include "fvdecay/reduction.hpp"

namespace fvdecay {

/// Two-component condensate with equal equilibrium densities rho_m,
/// coupled by a field of amplitude lam with quadratic feedback eta_c.
/// Working units: hbar = atom mass = 1 (and rho_m = 1 by default). The
/// phases of the components are locked to +/- phi/2 plus a common vortex
/// winding; phi follows a bubble-wall family in the radius parameter R.
///
/// All densities below are per component. The homogeneous potential
/// restricted to equal densities is
///
///   W(rho, phi) = g0 (rho - rho_m)^2 - 2 lam rho cos(phi)
///                 + 2 lam eta_c rho^2 sin^2(phi),
///
/// with the false vacuum at phi = pi, rho = rho_m - lam/g0 and the true
/// vacuum at phi = 0, rho = rho_m + lam/g0.
struct CondensateModel {
    double g0 = 1.0;
    double lam = 0.25;
    double eta_c = 0.8;
    double rho_m = 1.0;
    unsigned winding = 0;
    double sigma = 1.0;

    void validate() const {
        std::string problems;
        if (!(g0 > 0.0))
            problems += "g0 must be positive; ";
        if (!(lam > 0.0))
            problems += "lambda must be positive; ";
        if (!(eta_c > 0.0))
            problems += "eta must be positive; ";
        if (!(rho_m > 0.0))
            problems += "rho_m must be positive; ";
        if (!(sigma > 0.0))
            problems += "sigma must be positive; ";
        if (problems.empty()) {
            if (!(lam < 2.0 * g0 * rho_m))
                problems += "false vacuum requires lambda < 2 g0 rho_m; ";
            else if (!(eta_c > g0 / (2.0 * (g0 * rho_m - lam))))
                problems +=
                    "false vacuum requires eta > g0 / (2 (g0 rho_m - "
                    "lambda)); ";
        }
        if (!problems.empty())
            throw ValidationError("CondensateModel: " + problems);
    }

    double rho_false() const { return rho_m - lam / g0; }
    double rho_true() const { return rho_m + lam / g0; }
    double sound_speed() const { return std::sqrt(g0 * rho_false()); }
    double healing_length() const {
        return 1.0 / std::sqrt(2.0 * g0 * rho_false());
    }

    double w_pot(double rho, double phi) const {
        const double s = std::sin(phi);
        return g0 * (rho - rho_m) * (rho - rho_m) -
               2.0 * lam * rho * std::cos(phi) +
               2.0 * lam * eta_c * rho * rho * s * s;
    }
    double w_pot_drho(double rho, double phi) const {
        const double s = std::sin(phi);
        return 2.0 * g0 * (rho - rho_m) - 2.0 * lam * std::cos(phi) +
               4.0 * lam * eta_c * rho * s * s;
    }
    double w_pot_d2rho(double phi) const {
        const double s = std::sin(phi);
        return 2.0 * g0 + 4.0 * lam * eta_c * s * s;
    }
    /// Curvature of the potential in the density-imbalance direction,
    /// which screens the first-order density response.
    double imbalance_stiffness(double rho, double phi) const {
        const double s = std::sin(phi);
        return g0 + lam / rho * std::cos(phi) -
               2.0 * lam * eta_c * s * s;
    }
    /// Density extremizing W at fixed phase.
    double adiabatic_density(double phi) const {
        const double s = std::sin(phi);
        return (g0 * rho_m + lam * std::cos(phi)) /
               (g0 + 2.0 * lam * eta_c * s * s);
    }

    /// Phase-difference profile: pi (false vacuum) at R = 0, falling to
    /// 0 mod 2 pi inside the bubble; even in R.
    double phase(double R, double r) const {
        const double u = std::abs(R);
        return std::numbers::pi *
               (1.0 - 0.5 * std::tanh((r - u) / sigma) +
                0.5 * std::tanh((r + u) / sigma));
    }
    double phase_dr(double R, double r) const {
        const double u = std::abs(R);
        return std::numbers::pi / (2.0 * sigma) *
               (detail::sech2((r + u) / sigma) -
                detail::sech2((r - u) / sigma));
    }
    double phase_dR(double R, double r) const {
        const double u = std::abs(R);
        return std::numbers::pi / (2.0 * sigma) *
               (detail::sech2((r - u) / sigma) +
                detail::sech2((r + u) / sigma));
    }
};

/// Density and first-order response profiles at one bubble radius.
struct DensityProfiles {
    GridSpec r_grid;
    std::vector<double> rho;
    std::vector<double> gamma_resp;
    double R = 0.0;
};

namespace detail {

/// Thomas elimination for a tridiagonal system; zero pivots surface as
/// SingularOperator.
inline std::vector<double> solve_tridiag(std::vector<double> lower,
                                         std::vector<double> diag,
                                         std::vector<double> upper,
                                         std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(diag[i - 1]) < 1e-300)
            throw SingularOperator("tridiagonal solve: zero pivot");
        const double m = lower[i - 1] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (std::abs(diag[n - 1]) < 1e-300)
        throw SingularOperator("tridiagonal solve: zero pivot");
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    return x;
}

} // namespace detail

/// Newton relaxation for the stationary density at fixed R. Unknown is
/// s = sqrt(rho); the radial operator (1/r) d_r (r d_r s) is discretized
/// with half-node fluxes, regularized at the origin. Boundary conditions:
/// s'(0) = 0 (winding 0) or s(0) = 0 (vortex core), s -> sqrt(rho_F) at
/// the outer edge.
inline std::vector<double> solve_rho(const CondensateModel &m, double R,
                                     const GridSpec &grid, double tol) {
    const std::size_t n = grid.n;
    const double h = grid.spacing();
    const double s_inf = std::sqrt(m.rho_false());
    const bool vortex = m.winding >= 1;
    const double n2 = static_cast<double>(m.winding) *
                      static_cast<double>(m.winding);

    std::vector<double> phi(n), dphi2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = grid.at(i);
        phi[i] = m.phase(R, r);
        const double dp = m.phase_dr(R, r);
        dphi2[i] = dp * dp;
    }

    auto coeff_g = [&](std::size_t i, double s) {
        const double r = grid.at(i);
        double g = 0.25 * dphi2[i] + m.w_pot_drho(s * s, phi[i]);
        if (vortex && r > 0.0)
            g += n2 / (r * r);
        return g;
    };

    auto residual = [&](const std::vector<double> &s, std::vector<double> &f) {
        for (std::size_t i = 0; i < n; ++i) {
            const double r = grid.at(i);
            if (i == 0) {
                f[0] = vortex ? s[0]
                              : 4.0 * (s[1] - s[0]) / (h * h) -
                                    s[0] * coeff_g(0, s[0]);
            } else if (i == n - 1) {
                f[i] = s[i] - s_inf;
            } else {
                const double rp = r + 0.5 * h, rm = r - 0.5 * h;
                const double lap = (rp * (s[i + 1] - s[i]) -
                                    rm * (s[i] - s[i - 1])) /
                                   (r * h * h);
                f[i] = lap - s[i] * coeff_g(i, s[i]);
            }
        }
    };

    auto max_abs = [](const std::vector<double> &v) {
        double mx = 0.0;
        for (double x : v)
            mx = std::max(mx, std::abs(x));
        return mx;
    };

    auto newton = [&](std::vector<double> s) -> std::vector<double> {
        std::vector<double> f(n), lower(n - 1), diag(n), upper(n - 1);
        residual(s, f);
        double res = max_abs(f);
        for (int it = 0; it < 60; ++it) {
            if (res < tol)
                return s;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = grid.at(i);
                if (i == 0) {
                    if (vortex) {
                        diag[0] = 1.0;
                        upper[0] = 0.0;
                    } else {
                        diag[0] = -4.0 / (h * h) - coeff_g(0, s[0]) -
                                  s[0] * 2.0 * s[0] * m.w_pot_d2rho(phi[0]);
                        upper[0] = 4.0 / (h * h);
                    }
                } else if (i == n - 1) {
                    diag[i] = 1.0;
                    lower[i - 1] = 0.0;
                } else {
                    const double rp = r + 0.5 * h, rm = r - 0.5 * h;
                    lower[i - 1] = rm / (r * h * h);
                    upper[i] = rp / (r * h * h);
                    diag[i] = -(rp + rm) / (r * h * h) - coeff_g(i, s[i]) -
                              s[i] * 2.0 * s[i] * m.w_pot_d2rho(phi[i]);
                }
            }
            std::vector<double> rhs(n);
            for (std::size_t i = 0; i < n; ++i)
                rhs[i] = -f[i];
            const auto delta =
                detail::solve_tridiag(lower, diag, upper, rhs);
            double alpha = 1.0;
            std::vector<double> s_try(n), f_try(n);
            for (;;) {
                for (std::size_t i = 0; i < n; ++i)
                    s_try[i] = s[i] + alpha * delta[i];
                residual(s_try, f_try);
                const double res_try = max_abs(f_try);
                if (res_try < (1.0 - 0.25 * alpha) * res || res_try < tol) {
                    s = std::move(s_try);
                    f = f_try;
                    res = res_try;
                    break;
                }
                alpha *= 0.5;
                if (alpha < 1.0 / 128.0)
                    throw NewtonDivergence(
                        "solve_rho: line search stalled at iteration " +
                        std::to_string(it) +
                        ", residual = " + std::to_string(res));
            }
        }
        throw NewtonDivergence("solve_rho: no convergence in 60 iterations");
    };

    auto core_factor = [&](double r) {
        return vortex ? std::tanh(r / m.healing_length()) : 1.0;
    };
    // Homogeneous false-vacuum start; on divergence retry from the
    // density that extremizes W pointwise along the phase profile.
    std::vector<double> guess(n);
    for (std::size_t i = 0; i < n; ++i)
        guess[i] = s_inf * core_factor(grid.at(i));
    try {
        auto s = newton(guess);
        for (auto &x : s)
            x = std::max(x, 0.0);
        return s;
    } catch (const NewtonDivergence &) {
        for (std::size_t i = 0; i < n; ++i)
            guess[i] = std::sqrt(m.adiabatic_density(phi[i])) *
                       core_factor(grid.at(i));
        auto s = newton(guess);
        for (auto &x : s)
            x = std::max(x, 0.0);
        return s;
    }
}

namespace detail {

/// Linear response solve with an explicit source array (the production
/// source is half the R-derivative of the phase). Solving through this
/// hook keeps the operator identical for scaled sources.
inline std::vector<double>
solve_gamma_source(const CondensateModel &m, double R,
                   const std::vector<double> &s, const GridSpec &grid,
                   const std::vector<double> &source) {
    const std::size_t n = grid.n;
    const double h = grid.spacing();
    const bool vortex = m.winding >= 1;

    // (1/r) d_r (r d_r s) on the solved density, same stencil as the
    // nonlinear solve.
    std::vector<double> lap_s(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double r = grid.at(i);
        const double rp = r + 0.5 * h, rm = r - 0.5 * h;
        lap_s[i] =
            (rp * (s[i + 1] - s[i]) - rm * (s[i] - s[i - 1])) / (r * h * h);
    }
    if (!vortex)
        lap_s[0] = 4.0 * (s[1] - s[0]) / (h * h);

    std::vector<double> lower(n - 1, 0.0), diag(n, 0.0), upper(n - 1, 0.0),
        rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = grid.at(i);
        const double phi = m.phase(R, r);
        if (i == 0) {
            if (vortex) {
                diag[0] = 1.0;
                rhs[0] = 0.0;
            } else {
                // gamma'(0) = 0 through the regularized origin stencil.
                const double q =
                    lap_s[0] / (4.0 * s[0] * s[0] * s[0]) +
                    m.imbalance_stiffness(s[0] * s[0], phi);
                diag[0] = -1.0 / (s[0] * s[0] * h * h) - q;
                upper[0] = 1.0 / (s[0] * s[1] * h * h);
                rhs[0] = source[0];
            }
        } else if (i == n - 1) {
            diag[i] = 1.0;
            rhs[i] = 0.0;
        } else {
            const double rp = r + 0.5 * h, rm = r - 0.5 * h;
            const double pref = 1.0 / (4.0 * r * s[i] * h * h);
            const double q = lap_s[i] / (4.0 * r * s[i] * s[i] * s[i]) * r +
                             m.imbalance_stiffness(s[i] * s[i], phi);
            lower[i - 1] = pref * rm / s[i - 1];
            upper[i] = pref * rp / s[i + 1];
            diag[i] = -pref * (rp + rm) / s[i] - q;
            rhs[i] = source[i];
        }
    }
    return solve_tridiag(std::move(lower), std::move(diag), std::move(upper),
                         std::move(rhs));
}

} // namespace detail

/// First-order density response to the motion of R: a single banded
/// solve of the linearized equation sourced by the phase velocity.
inline std::vector<double> solve_gamma(const CondensateModel &m, double R,
                                       const std::vector<double> &rho_sqrt,
                                       const GridSpec &grid) {
    std::vector<double> source(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i)
        source[i] = 0.5 * m.phase_dR(R, grid.at(i));
    return detail::solve_gamma_source(m, R, rho_sqrt, grid, source);
}

/// Solve both profiles at one radius.
inline DensityProfiles solve_profiles(const CondensateModel &m, double R,
                                      const GridSpec &grid, double tol) {
    DensityProfiles p;
    p.r_grid = grid;
    p.R = R;
    auto s = solve_rho(m, R, grid, tol);
    p.gamma_resp = solve_gamma(m, R, s, grid);
    p.rho.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i)
        p.rho[i] = s[i] * s[i];
    return p;
}

namespace detail {

inline double trapezoid_r(const GridSpec &g, const std::vector<double> &f) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < g.n; ++i)
        s += 0.5 * (f[i] * g.at(i) + f[i + 1] * g.at(i + 1)) * g.spacing();
    return s;
}

} // namespace detail

/// Effective mass of R: overlap of the density response with the phase
/// velocity (positive because the response opposes the source).
inline double condensate_K(const CondensateModel &m,
                           const DensityProfiles &p) {
    std::vector<double> f(p.r_grid.n);
    for (std::size_t i = 0; i < p.r_grid.n; ++i)
        f[i] = -2.0 * std::numbers::pi * p.gamma_resp[i] *
               m.phase_dR(p.R, p.r_grid.at(i));
    return detail::trapezoid_r(p.r_grid, f);
}

/// Effective potential of R: gradient plus interaction energy of the
/// profile pair relative to the homogeneous false vacuum. Coefficients
/// follow the density equation (both components counted).
inline double condensate_U(const CondensateModel &m,
                           const DensityProfiles &p) {
    const std::size_t n = p.r_grid.n;
    const double h = p.r_grid.spacing();
    const double w_fv = m.w_pot(m.rho_false(), std::numbers::pi);
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = p.r_grid.at(i);
        const double s = std::sqrt(std::max(p.rho[i], 0.0));
        double ds;
        if (i == 0)
            ds = (std::sqrt(std::max(p.rho[1], 0.0)) - s) / h;
        else if (i == n - 1)
            ds = (s - std::sqrt(std::max(p.rho[n - 2], 0.0))) / h;
        else
            ds = (std::sqrt(std::max(p.rho[i + 1], 0.0)) -
                  std::sqrt(std::max(p.rho[i - 1], 0.0))) /
                 (2.0 * h);
        const double dphi = m.phase_dr(p.R, r);
        f[i] = ds * ds + 0.25 * p.rho[i] * dphi * dphi +
               m.w_pot(p.rho[i], m.phase(p.R, r)) - w_fv;
    }
    return 2.0 * std::numbers::pi * detail::trapezoid_r(p.r_grid, f);
}

/// Default radial grid for the profile solves: reaches 15 walls past the
/// largest bubble and resolves both the wall and the healing length.
inline GridSpec condensate_r_grid(const CondensateModel &m, double r_need) {
    const double r_max = r_need + 15.0 * m.sigma;
    const double h = std::min(m.sigma, m.healing_length()) / 12.0;
    const auto n = static_cast<std::size_t>(std::ceil(r_max / h)) + 1;
    return {0.0, h * static_cast<double>(n - 1), n};
}

struct CondensateTables {
    ReducedSystem system;
    double expansion_validity = 0.0; // max |gamma R'| / rho_F estimate
};

/// Map an R-grid through the profile solves and package the resulting
/// K(R), U(R) exactly like the relativistic reduction. For a vortex
/// background the potential is re-zeroed on the R = 0 profile, which is
/// the initial state of the decay.
inline CondensateTables
condensate_reduced_system(const CondensateModel &m, const GridSpec &r_grid,
                          const GridSpec &radial, double tol,
                          unsigned jobs = 1) {
    m.validate();
    if (r_grid.n < 3)
        throw ValidationError("condensate_reduced_system: grid too small");
    if (std::abs(r_grid.lo + r_grid.hi) > 1e-9 * r_grid.spacing())
        throw ValidationError(
            "condensate_reduced_system: grid must be symmetric about 0");

    ReducedSystem rs;
    rs.grid = r_grid;
    rs.dim = 2;
    rs.left_open_interior = false;
    rs.k_table.resize(r_grid.n);
    rs.u_table.resize(r_grid.n);
    parallel_for(r_grid.n, jobs, [&](std::size_t i) {
        const auto p = solve_profiles(m, r_grid.at(i), radial, tol);
        rs.k_table[i] = condensate_K(m, p);
        rs.u_table[i] = condensate_U(m, p);
    });

    const auto p0 = solve_profiles(m, 0.0, radial, tol);
    const double u_zero = condensate_U(m, p0);
    rs.k0 = condensate_K(m, p0);
    if (m.winding >= 1)
        for (auto &u : rs.u_table)
            u -= u_zero;

    auto u_of = [&](double R) {
        const auto p = solve_profiles(m, R, radial, tol);
        return condensate_U(m, p) - (m.winding >= 1 ? u_zero : 0.0);
    };
    std::tie(rs.r_umax, rs.u_max) =
        detail::refine_barrier(r_grid, rs.u_table, u_of);
    rs.upp0 = detail::second_deriv_at_zero(u_of, 0.1 * rs.r_umax);
    rs.finalize_tables();

    CondensateTables out;
    // Diagnostic for the validity of the first-order density expansion:
    // response at the barrier times the zero-energy speed there.
    const auto pb = solve_profiles(m, rs.r_umax, radial, tol);
    double gmax = 0.0;
    for (double g : pb.gamma_resp)
        gmax = std::max(gmax, std::abs(g));
    const double r_speed =
        std::sqrt(2.0 * rs.u_max / rs.k_at(rs.r_umax));
    out.expansion_validity = gmax * r_speed / m.rho_false();
    out.system = std::move(rs);
    return out;
}

/// Emergent-relativity check: the phase field alone, with the densities
/// eliminated adiabatically, is a scalar theory with sound speed
/// c^2 = rho_F * stiffness. Its O(3)-symmetric bounce provides the
/// field-level action against which the reduced bounce is validated.
inline std::pair<double, BounceProfile>
condensate_field_action(const CondensateModel &m, double tol) {
    m.validate();
    const double rho_bar = m.rho_false();
    const double stiff = m.imbalance_stiffness(rho_bar, std::numbers::pi);
    if (!(stiff > 0.0))
        throw ValidationError(
            "condensate_field_action: non-positive imbalance stiffness");
    const double c = std::sqrt(rho_bar * stiff);
    const double scale = std::sqrt(2.0 / rho_bar); // canonical chi -> phi
    const double w_fv = m.w_pot(rho_bar, std::numbers::pi);
    auto v = [&](double chi) {
        const double phi = chi * scale;
        return m.w_pot(m.adiabatic_density(phi), phi) - w_fv;
    };
    auto v_prime = [&](double chi) {
        // Envelope derivative: the density sits at its own extremum.
        const double phi = chi * scale;
        const double rho = m.adiabatic_density(phi);
        const double s = std::sin(phi);
        const double dw_dphi = 2.0 * m.lam * rho * s +
                               4.0 * m.lam * m.eta_c * rho * rho * s *
                                   std::cos(phi);
        return dw_dphi * scale;
    };
    const double chi_false = std::numbers::pi / scale;
    auto prof = solve_bounce_generic(v, v_prime, chi_false, 0.0, 2, tol);
    prof.action =
        euclidean_action_generic(prof, v, chi_false, 2) / c;
    return {prof.action, std::move(prof)};
}

/// Dump profiles at one R as CSV (r, rho, gamma).
inline void write_profiles_csv(const DensityProfiles &p,
                               const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path);
    out << "r,rho,gamma\n";
    for (std::size_t i = 0; i < p.r_grid.n; ++i)
        out << format_full(p.r_grid.at(i)) << ',' << format_full(p.rho[i])
            << ',' << format_full(p.gamma_resp[i]) << '\n';
}

} // namespace fvdecay
