#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "fvdecay/errors.hpp"
#include "fvdecay/interp.hpp"
#include "fvdecay/ode.hpp"
#include "fvdecay/optimize.hpp"
#include "fvdecay/potential.hpp"
#include "fvdecay/quadrature.hpp"
#include "fvdecay/reduction.hpp"

namespace fvdecay {

/// Radial profile of the Euclidean bounce in d space dimensions, together
/// with its action.
struct BounceProfile {
    std::vector<double> rho_grid;
    std::vector<double> phi;
    std::vector<double> phi_prime;
    double action = 0.0;
    unsigned dim = 2;
};

/// Zero-energy turning point and action of the bounce of the reduced
/// (K, U) system.
struct ReducedBounce {
    double turning_point = 0.0; // R* with U(R*) = 0 beyond the barrier
    double action = 0.0;
    double sigma = 0.0; // wall width the tables were built with
};

/// Which equation of motion the tau-shooting cross-check integrates. The
/// variational equation carries the K'(R) R'^2 / 2 term required for the
/// conserved energy 1/2 K R'^2 - U; the plain form omits half of it.
enum class ReducedEom { Variational, PlainMassFlux };

namespace detail {

enum class ShotOutcome { Overshoot, Undershoot, Settled, HitCap };

struct ShotResult {
    ShotOutcome outcome;
    double min_excursion; // min over the path of |phi - phi_false| / gap
};

/// Integrate one release from rest at phi0 and classify it. `psi` is the
/// signed distance from the false vacuum, positive on the true-vacuum
/// side.
template <class VPrime>
ShotResult classify_shot(const VPrime &v_prime, double phi_false, double gap,
                         double dir, double phi0, unsigned d, double rho_max,
                         double ode_tol) {
    const double rho_eps = 1e-6;
    const double a0 = v_prime(phi0) / (2.0 * (d + 1.0));
    std::array<double, 2> y{phi0 + a0 * rho_eps * rho_eps,
                            2.0 * a0 * rho_eps};
    auto rhs = [&](double rho, const std::array<double, 2> &s) {
        return std::array<double, 2>{
            s[1], v_prime(s[0]) - static_cast<double>(d) / rho * s[1]};
    };
    ShotOutcome outcome = ShotOutcome::HitCap;
    double min_exc = std::numeric_limits<double>::max();
    auto stop = [&](double, const std::array<double, 2> &s) {
        const double psi = dir * (s[0] - phi_false);
        const double dpsi = dir * s[1];
        min_exc = std::min(min_exc, std::abs(psi) / gap);
        if (psi < -1e-9 * gap) {
            outcome = ShotOutcome::Overshoot;
            return true;
        }
        if (dpsi > 1e-12 * gap && psi > 1e-5 * gap) {
            outcome = ShotOutcome::Undershoot;
            return true;
        }
        if (psi <= 1e-7 * gap && std::abs(dpsi) <= 1e-7 * gap) {
            outcome = ShotOutcome::Settled;
            return true;
        }
        return false;
    };
    OdeOptions opt;
    opt.rel_tol = ode_tol;
    opt.abs_tol = ode_tol * gap;
    opt.h_init = 1e-4;
    integrate_dopri5<2>(rhs, rho_eps, y, rho_max, opt,
                        [](double, const std::array<double, 2> &) {}, stop);
    return {outcome, min_exc};
}

} // namespace detail

/// Overshoot/undershoot bisection for the O(d+1)-symmetric bounce of a
/// generic potential. `v_prime` is V'; the release value is bracketed in
/// (phi_false, phi_true]. Throws BracketingFailure when no release
/// overshoots (degenerate or barrier-less potentials) and
/// ToleranceUnreachable when the refined trajectory never approaches the
/// false vacuum closely enough.
template <class V, class VPrime>
BounceProfile solve_bounce_generic(const V &v, const VPrime &v_prime,
                                   double phi_false, double phi_true,
                                   unsigned d, double tol,
                                   std::size_t n_profile = 6000) {
    const double gap = std::abs(phi_true - phi_false);
    const double dir = phi_true > phi_false ? 1.0 : -1.0;
    if (gap <= 0.0)
        throw BracketingFailure("bounce: degenerate vacua");
    const double ode_tol = std::min(1e-10, tol);

    // Crude thin-wall scales to size the integration window.
    const double m2_false = std::abs((v_prime(phi_false + 1e-6 * gap * dir) -
                                      v_prime(phi_false)) /
                                     (1e-6 * gap * dir));
    const double m_false = std::sqrt(std::max(m2_false, 1e-12));
    double wall_tension = 0.0;
    {
        const int nw = 200;
        for (int i = 0; i < nw; ++i) {
            const double p =
                phi_false + gap * dir * (i + 0.5) / static_cast<double>(nw);
            wall_tension +=
                std::sqrt(2.0 * std::max(v(p), 0.0)) * gap / nw;
        }
    }
    const double dv = std::max(v(phi_false) - v(phi_true), 1e-300);
    double rho_cap =
        12.0 * std::max(d * wall_tension / dv, 3.0 / m_false) + 10.0 / m_false;

    auto release = [&](double s) { return phi_false + dir * gap * s; };
    auto shoot = [&](double s) {
        for (int attempt = 0;; ++attempt) {
            auto res = detail::classify_shot(v_prime, phi_false, gap, dir,
                                             release(s), d, rho_cap, ode_tol);
            if (res.outcome != detail::ShotOutcome::HitCap)
                return res;
            if (res.min_excursion < 1e-5) {
                res.outcome = detail::ShotOutcome::Settled;
                return res;
            }
            if (attempt >= 6)
                throw ToleranceUnreachable(
                    "bounce shooting: trajectory did not classify within "
                    "the integration window");
            rho_cap *= 2.0;
        }
    };

    // Bracket: small releases undershoot; search for an overshoot close
    // to the true vacuum.
    double s_lo = 1e-3;
    if (shoot(s_lo).outcome == detail::ShotOutcome::Overshoot)
        s_lo = 1e-9;
    double s_hi = -1.0;
    for (int j = 1; j <= 52; ++j) {
        const double s = 1.0 - std::pow(0.5, j);
        const auto res = shoot(s);
        if (res.outcome == detail::ShotOutcome::Overshoot ||
            res.outcome == detail::ShotOutcome::Settled) {
            s_hi = s;
            break;
        }
        s_lo = s;
    }
    if (s_hi < 0.0)
        throw BracketingFailure(
            "bounce shooting: no overshoot found up to the true vacuum "
            "(barrier too degenerate)");

    for (int it = 0; it < 200 && (s_hi - s_lo) > 1e-15; ++it) {
        const double s = 0.5 * (s_lo + s_hi);
        const auto res = shoot(s);
        if (res.outcome == detail::ShotOutcome::Undershoot)
            s_lo = s;
        else
            s_hi = s;
    }
    const double s_best = 0.5 * (s_lo + s_hi);

    // Settling point of the refined trajectory.
    const double rho_eps = 1e-6;
    const double phi0 = release(s_best);
    auto rhs = [&](double rho, const std::array<double, 2> &s) {
        return std::array<double, 2>{
            s[1], v_prime(s[0]) - static_cast<double>(d) / rho * s[1]};
    };
    double rho_settle = -1.0;
    double min_exc = std::numeric_limits<double>::max();
    {
        const double a0 = v_prime(phi0) / (2.0 * (d + 1.0));
        std::array<double, 2> y{phi0 + a0 * rho_eps * rho_eps,
                                2.0 * a0 * rho_eps};
        OdeOptions opt;
        opt.rel_tol = ode_tol;
        opt.abs_tol = ode_tol * gap;
        auto stop = [&](double rho, const std::array<double, 2> &st) {
            const double exc = std::abs(st[0] - phi_false) / gap;
            min_exc = std::min(min_exc, exc);
            if (exc <= 0.5e-6) {
                rho_settle = rho;
                return true;
            }
            return false;
        };
        integrate_dopri5<2>(rhs, rho_eps, y, rho_cap, opt,
                            [](double, const std::array<double, 2> &) {},
                            stop);
    }
    if (rho_settle < 0.0)
        throw ToleranceUnreachable(
            "bounce shooting: refined trajectory only reached |phi - "
            "phi_F|/gap = " +
            std::to_string(min_exc));

    // Re-integrate on a uniform grid for the stored profile, truncated at
    // the first node inside the settling band.
    BounceProfile prof;
    prof.dim = d;
    {
        const double a0 = v_prime(phi0) / (2.0 * (d + 1.0));
        std::array<double, 2> y0{phi0 + a0 * rho_eps * rho_eps,
                                 2.0 * a0 * rho_eps};
        std::vector<double> rg, ph, pp;
        integrate_rk4<2>(rhs, rho_eps, y0, rho_settle, n_profile,
                         [&](double rho, const std::array<double, 2> &st) {
                             rg.push_back(rho);
                             ph.push_back(st[0]);
                             pp.push_back(st[1]);
                         });
        std::size_t end = rg.size();
        for (std::size_t i = rg.size() / 2; i < rg.size(); ++i) {
            if (std::abs(ph[i] - phi_false) <= 1e-6 * gap) {
                end = i + 1;
                break;
            }
        }
        rg.resize(end);
        ph.resize(end);
        pp.resize(end);
        prof.rho_grid = std::move(rg);
        prof.phi = std::move(ph);
        prof.phi_prime = std::move(pp);
    }
    if (std::abs(prof.phi.back() - phi_false) > 1e-6 * gap)
        throw ToleranceUnreachable(
            "bounce profile does not settle onto the false vacuum");
    return prof;
}

/// Euclidean action of a bounce profile for a generic (already offset)
/// potential: quadrature of the gradient and potential energy over the
/// stored profile plus a bound on the truncated tail.
template <class V>
double euclidean_action_generic(const BounceProfile &b, const V &v,
                                double phi_false, unsigned d) {
    const double area = sphere_area(d);
    const double v_false = v(phi_false);
    double s = 0.0;
    auto f = [&](std::size_t i) {
        const double integrand =
            0.5 * b.phi_prime[i] * b.phi_prime[i] + v(b.phi[i]) - v_false;
        return integrand * std::pow(b.rho_grid[i], static_cast<int>(d));
    };
    for (std::size_t i = 0; i + 1 < b.rho_grid.size(); ++i) {
        const double h = b.rho_grid[i + 1] - b.rho_grid[i];
        s += 0.5 * h * (f(i) + f(i + 1));
    }
    s *= area;
    // Tail beyond the last node: linearized decay at rate m around the
    // false vacuum.
    const double eps = std::abs(b.phi.back() - phi_false);
    if (eps > 0.0) {
        const double dv2 = std::abs(v(phi_false + 2.0 * eps) - v(phi_false));
        const double m = std::sqrt(std::max(dv2 / (2.0 * eps * eps), 1e-12));
        const double tail =
            area * (0.5 * b.phi_prime.back() * b.phi_prime.back() +
                    0.5 * m * m * eps * eps) *
            std::pow(b.rho_grid.back(), static_cast<int>(d)) / m;
        s += tail;
    }
    return s;
}

/// O(d+1) bounce of the quartic scalar potential.
inline BounceProfile solve_bounce_field(const ScalarPotential &p, unsigned d,
                                        double tol,
                                        std::size_t n_profile = 6000) {
    auto prof = solve_bounce_generic(
        [&](double phi) { return p.value(phi); },
        [&](double phi) { return p.deriv(phi); }, p.phi_false(), p.phi_true(),
        d, tol, n_profile);
    prof.action = euclidean_action_generic(
        prof, [&](double phi) { return p.value(phi); }, p.phi_false(), d);
    return prof;
}

inline double euclidean_action_field(const BounceProfile &b,
                                     const ScalarPotential &p, unsigned d) {
    return euclidean_action_generic(
        b, [&](double phi) { return p.value(phi); }, p.phi_false(), d);
}

/// Zero of U beyond the barrier. Throws NoTurningPoint when U never
/// crosses zero on the tabulated range.
inline double find_turning_point(const ReducedSystem &rs) {
    const double lo = rs.r_umax;
    const double hi = rs.grid.hi;
    const int n_scan = 256;
    double a = lo, b = -1.0;
    for (int i = 1; i <= n_scan; ++i) {
        const double r = lo + (hi - lo) * i / static_cast<double>(n_scan);
        if (rs.u_at(r) <= 0.0) {
            b = r;
            break;
        }
        a = r;
    }
    if (b < 0.0)
        throw NoTurningPoint("U does not cross zero beyond the barrier "
                             "within the tabulated range");
    return bisect_root([&](double r) { return rs.u_at(r); }, a, b,
                       1e-12 * (hi - lo));
}

/// Bounce of the reduced system by the zero-energy quadrature
///
///   S = 2 * Int_0^{R*} sqrt(2 K U) dR,
///
/// the action of the zero-Euclidean-energy trajectory of the variational
/// equation of motion.
inline ReducedBounce solve_bounce_reduced(const ReducedSystem &rs,
                                          double tol) {
    ReducedBounce rb;
    rb.turning_point = find_turning_point(rs);
    auto integrand = [&](double r) {
        const double p = 2.0 * rs.k_at(r) * rs.u_at(r);
        return p > 0.0 ? std::sqrt(p) : 0.0;
    };
    rb.action = 2.0 * integrate_adaptive(integrand, 0.0, rb.turning_point,
                                         std::max(tol, 1e-9), 8000);
    return rb;
}

struct ShootDiagnostics {
    double action = 0.0;
    double release = 0.0;        // R(0) of the refined trajectory
    double energy_violation = 0.0; // max |1/2 K R'^2 - U| along the path
};

/// Direct shooting on the imaginary-time equation of motion of the
/// reduced system, used as a cross-check of the quadrature route. The
/// release radius is bisected until the trajectory relaxes onto R = 0.
inline ShootDiagnostics shoot_bounce_reduced(const ReducedSystem &rs,
                                             double tol,
                                             ReducedEom eom =
                                                 ReducedEom::Variational) {
    const double r_star = find_turning_point(rs);
    auto rhs = [&](double, const std::array<double, 2> &y) {
        const double k = rs.k_at(y[0]);
        const double kp = rs.k_prime_at(y[0]);
        const double up = rs.u_prime_at(y[0]);
        const double coeff = eom == ReducedEom::Variational ? 0.5 : 1.0;
        return std::array<double, 2>{y[1],
                                     (up - coeff * kp * y[1] * y[1]) / k};
    };
    const double eps_r = 1e-7 * r_star;
    auto classify = [&](double r0) {
        std::array<double, 2> y{r0, 0.0};
        int result = 0; // -1 undershoot, +1 overshoot, 0 settled
        auto stop = [&](double, const std::array<double, 2> &s) {
            if (s[0] < -1e-12 * r_star) {
                result = 1;
                return true;
            }
            if (s[1] > 1e-12 && s[0] > eps_r) {
                result = -1;
                return true;
            }
            if (s[0] <= eps_r) {
                result = 0;
                return true;
            }
            return false;
        };
        OdeOptions opt;
        opt.rel_tol = 1e-11;
        opt.abs_tol = 1e-13 * r_star;
        const double t_cap = 1e4 / std::sqrt(rs.upp0 / rs.k0);
        integrate_dopri5<2>(rhs, 0.0, y, t_cap, opt,
                            [](double, const std::array<double, 2> &) {},
                            stop);
        return result;
    };

    double lo = rs.r_umax + 1e-6 * (r_star - rs.r_umax);
    double hi = std::min(r_star * 1.2, rs.grid.hi * 0.999);
    if (classify(hi) < 0) {
        // Expand toward the edge until an overshoot appears.
        while (classify(hi) < 0 && hi < rs.grid.hi * 0.999)
            hi = std::min(hi * 1.05, rs.grid.hi * 0.999);
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * r_star; ++it) {
        const double mid = 0.5 * (lo + hi);
        const int c = classify(mid);
        if (c < 0)
            lo = mid;
        else if (c > 0)
            hi = mid;
        else {
            lo = hi = mid;
            break;
        }
    }
    const double r0 = 0.5 * (lo + hi);

    // Action and energy drift along the refined half-trajectory, doubled.
    ShootDiagnostics diag;
    diag.release = r0;
    std::array<double, 3> y{r0, 0.0, 0.0};
    auto rhs3 = [&](double t, const std::array<double, 3> &s) {
        const auto d2 = rhs(t, {s[0], s[1]});
        const double k = rs.k_at(s[0]);
        return std::array<double, 3>{
            d2[0], d2[1], 0.5 * k * s[1] * s[1] + rs.u_at(s[0])};
    };
    double max_viol = 0.0;
    auto observer = [&](double, const std::array<double, 3> &s) {
        const double e = 0.5 * rs.k_at(s[0]) * s[1] * s[1] - rs.u_at(s[0]);
        max_viol = std::max(max_viol, std::abs(e));
    };
    auto stop3 = [&](double, const std::array<double, 3> &s) {
        return s[0] <= eps_r || (s[1] > 1e-12 && s[0] > eps_r);
    };
    OdeOptions opt;
    opt.rel_tol = std::min(1e-11, tol);
    opt.abs_tol = 1e-13 * r_star;
    const double t_cap = 1e4 / std::sqrt(rs.upp0 / rs.k0);
    integrate_dopri5<3>(rhs3, 0.0, y, t_cap, opt, observer, stop3);
    // Tail: harmonic relaxation from the stopping radius.
    const double omega = std::sqrt(rs.upp0 / rs.k0);
    diag.action = 2.0 * y[2] + y[0] * y[0] * rs.k0 * omega;
    diag.energy_violation = max_viol;
    return diag;
}

/// Minimize the reduced bounce action over the wall width. The tabulation
/// behind each evaluation uses a coarse grid sized on the fly. Throws
/// NoInteriorMinimum when the optimum sits at an endpoint of the range.
inline std::pair<double, double>
optimize_sigma(const AnsatzFamily &family, double sigma_lo, double sigma_hi,
               double tol, unsigned jobs = 1,
               std::size_t coarse_points = 481) {
    auto action_of = [&](double sigma) {
        const AnsatzFamily a = family.with_sigma(sigma);
        auto [r_umax, u_max] = barrier_scan(a, tol);
        double edge = r_umax;
        const double march = std::max(a.sigma() / 4.0, r_umax / 8.0);
        while (compute_U(a, edge, tol) > -0.5 * u_max)
            edge += march;
        GridSpec grid{-edge, edge, coarse_points};
        const ReducedSystem rs = tabulate(a, grid, tol, jobs);
        return solve_bounce_reduced(rs, tol).action;
    };
    const double x_tol = 1e-4 * (sigma_hi - sigma_lo);
    auto [sigma_opt, action_opt] =
        golden_section_min(action_of, sigma_lo, sigma_hi, x_tol);
    if (sigma_opt - sigma_lo < 4.0 * x_tol ||
        sigma_hi - sigma_opt < 4.0 * x_tol)
        throw NoInteriorMinimum(
            "optimize_sigma: minimum at range endpoint, widen the bracket");
    return {sigma_opt, action_opt};
}

/// Dimensionless comparison between a measured late-time decay rate and
/// the instanton estimate with one zero mode:
///
///   -ln(Gamma / U_max) - (S_E - ln(S_E / 2 pi) / 2).
inline double comparison_statistic(double gamma_plateau, double u_max,
                                   double s_e) {
    return -std::log(gamma_plateau / u_max) -
           (s_e - 0.5 * std::log(s_e / (2.0 * std::numbers::pi)));
}

inline double comparison_statistic(double gamma_plateau,
                                   const ReducedSystem &rs, double s_e) {
    return comparison_statistic(gamma_plateau, rs.u_max, s_e);
}

/// Write a bounce profile as CSV (rho, phi).
inline void write_bounce_csv(const BounceProfile &b, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path);
    out << "rho,phi\n";
    for (std::size_t i = 0; i < b.rho_grid.size(); ++i)
        out << format_full(b.rho_grid[i]) << ',' << format_full(b.phi[i])
            << '\n';
}

} // namespace fvdecay
