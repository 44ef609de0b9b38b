#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fvdecay/ansatz.hpp"
#include "fvdecay/errors.hpp"
#include "fvdecay/interp.hpp"
#include "fvdecay/numutil.hpp"
#include "fvdecay/optimize.hpp"
#include "fvdecay/parallel.hpp"
#include "fvdecay/quadrature.hpp"

namespace fvdecay {

/// Effective mass of the collective coordinate R: the radial integral of
/// the squared R-derivative of the profile, weighted by the sphere area.
inline double compute_K(const AnsatzFamily &a, double R, double tol) {
    const double r_cut = a.tail_cutoff(R);
    const unsigned d = a.dim();
    const double area = sphere_area(d - 1);
    auto integrand = [&](double r) {
        const double g = a.deriv_R(R, r);
        return g * g * std::pow(r, static_cast<int>(d) - 1);
    };
    return area * integrate_adaptive(integrand, 0.0, r_cut, tol);
}

/// Effective potential of R: gradient plus potential energy of the
/// profile relative to the false vacuum.
inline double compute_U(const AnsatzFamily &a, double R, double tol) {
    const double r_cut = a.tail_cutoff(R);
    const unsigned d = a.dim();
    const double area = sphere_area(d - 1);
    const auto &pot = a.potential();
    // Subtracting V(phi_F) through the same code path keeps the integrand
    // exactly zero on the false vacuum whatever the compiler contracts.
    const double v_false = pot.value(pot.phi_false());
    auto integrand = [&](double r) {
        const double dr = a.deriv_r(R, r);
        return (0.5 * dr * dr + pot.value(a.value(R, r)) - v_false) *
               std::pow(r, static_cast<int>(d) - 1);
    };
    // Smaller magnitudes than this are indistinguishable from the
    // rounding noise of an identically-vanishing profile.
    const double negligible =
        tol * 1e-2 * area * (1.0 + std::abs(pot.value(pot.phi_true()))) *
        std::pow(std::max(a.sigma(), 1.0), static_cast<int>(d));
    return area *
           integrate_adaptive(integrand, 0.0, r_cut, tol, 4000, negligible);
}

/// Tabulated reduced system: K(R) and U(R) on a uniform R-grid together
/// with the harmonic data at the origin and the barrier location. This is
/// everything the wave-function evolution and the reduced instanton need.
struct ReducedSystem {
    GridSpec grid;
    std::vector<double> k_table;
    std::vector<double> u_table;
    double k0 = 0.0;     // K(0)
    double upp0 = 0.0;   // U''(0)
    double r_umax = 0.0; // barrier position (R > 0)
    double u_max = 0.0;  // barrier height
    unsigned dim = 2;
    // True for families that are not even in R: the region counted as
    // "still in the false vacuum" is then everything left of the barrier.
    bool left_open_interior = false;

    CubicTable k_spline;
    CubicTable u_spline;

    void finalize_tables() {
        k_spline = CubicTable(grid, k_table);
        u_spline = CubicTable(grid, u_table);
    }

    double k_at(double R) const { return k_spline.value(R); }
    double u_at(double R) const { return u_spline.value(R); }
    double u_prime_at(double R) const { return u_spline.deriv(R); }
    double k_prime_at(double R) const { return k_spline.deriv(R); }

    /// Bounds of the barrier-interior region used for the survival
    /// probability.
    std::pair<double, double> interior_bounds() const {
        return left_open_interior ? std::make_pair(grid.lo, r_umax)
                                  : std::make_pair(-r_umax, r_umax);
    }
};

namespace detail {

/// Locate the barrier (R_Umax, U_max) of a tabulated U for R > 0 and
/// refine it with golden-section on the continuous evaluator `u_of`.
template <class UFn>
std::pair<double, double> refine_barrier(const GridSpec &grid,
                                         const std::vector<double> &u,
                                         const UFn &u_of) {
    std::size_t best = 0;
    double best_u = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
        if (grid.at(i) <= 0.0)
            continue;
        if (best == 0 || u[i] > best_u) {
            best = i;
            best_u = u[i];
        }
    }
    if (best == 0 || best + 1 >= grid.n || best_u <= 0.0)
        throw BarrierNotFound(
            "no interior maximum of U found for R > 0 on the grid");
    const double a = grid.at(best - 1);
    const double b = grid.at(best + 1);
    auto neg_u = [&](double R) { return -u_of(R); };
    auto [r_star, neg_val] =
        golden_section_min(neg_u, a, b, 1e-10 * (grid.hi - grid.lo));
    return {r_star, -neg_val};
}

/// Fourth-order centered second difference of U at R = 0.
template <class UFn> double second_deriv_at_zero(const UFn &u_of, double h) {
    const double u0 = u_of(0.0);
    const double up1 = u_of(h), um1 = u_of(-h);
    const double up2 = u_of(2.0 * h), um2 = u_of(-2.0 * h);
    return (-up2 + 16.0 * up1 - 30.0 * u0 + 16.0 * um1 - um2) /
           (12.0 * h * h);
}

} // namespace detail

/// Fill the K/U tables over `grid` and extract harmonic and barrier data.
/// Grid points are evaluated independently (and in parallel when jobs !=
/// 1); the grid must be symmetric about 0 for families even in R.
inline ReducedSystem tabulate(const AnsatzFamily &a, const GridSpec &grid,
                              double tol, unsigned jobs = 1) {
    if (grid.n < 3)
        throw ValidationError("tabulate: grid needs at least 3 points");
    if (a.even_in_radius() &&
        std::abs(grid.lo + grid.hi) > 1e-9 * grid.spacing() + 1e-300)
        throw ValidationError(
            "tabulate: grid must be symmetric about 0 for this family");

    ReducedSystem rs;
    rs.grid = grid;
    rs.dim = a.dim();
    rs.left_open_interior = !a.even_in_radius();
    rs.k_table.resize(grid.n);
    rs.u_table.resize(grid.n);
    parallel_for(grid.n, jobs, [&](std::size_t i) {
        const double R = grid.at(i);
        rs.k_table[i] = compute_K(a, R, tol);
        rs.u_table[i] = compute_U(a, R, tol);
    });

    auto u_of = [&](double R) { return compute_U(a, R, tol); };
    rs.k0 = compute_K(a, 0.0, tol);
    std::tie(rs.r_umax, rs.u_max) =
        detail::refine_barrier(grid, rs.u_table, u_of);
    auto u_fine = [&](double R) { return compute_U(a, R, 0.1 * tol); };
    rs.upp0 = detail::second_deriv_at_zero(u_fine, 0.1 * rs.r_umax);
    rs.finalize_tables();
    return rs;
}

/// Rebuild the derived quantities of a reduced system from bare tables
/// (used by tests with synthetic systems and when loading from CSV). The
/// barrier is located on the table spline; set require_barrier = false
/// for systems without one.
inline ReducedSystem make_reduced_system(GridSpec grid,
                                         std::vector<double> k_table,
                                         std::vector<double> u_table,
                                         unsigned dim,
                                         bool left_open_interior = false,
                                         bool require_barrier = true) {
    ReducedSystem rs;
    rs.grid = grid;
    rs.dim = dim;
    rs.left_open_interior = left_open_interior;
    rs.k_table = std::move(k_table);
    rs.u_table = std::move(u_table);
    rs.finalize_tables();
    rs.k0 = rs.k_at(0.0);
    if (require_barrier) {
        auto u_of = [&](double R) { return rs.u_at(R); };
        std::tie(rs.r_umax, rs.u_max) =
            detail::refine_barrier(grid, rs.u_table, u_of);
        rs.upp0 = detail::second_deriv_at_zero(u_of, 0.1 * rs.r_umax);
    } else {
        auto u_of = [&](double R) { return rs.u_at(R); };
        rs.upp0 = detail::second_deriv_at_zero(u_of, 2.0 * grid.spacing());
    }
    return rs;
}

/// Controls for the automatic R-grid choice.
struct GridPolicy {
    double edge_depth = 20.0;   // require U(edge) < -edge_depth * U_max
    double wall_depth = 25.0;   // left wall for one-sided families
    double points_per_wavelength = 8.0;
    double state_halfwidths = 8.0; // room for initial-state tails
    double min_halfwidth = 0.0;
    std::size_t max_points = 200001;
};

/// Scan outward from the origin for the barrier of u_of(R) and refine it
/// by golden section; `step` sets the march resolution.
template <class UFn>
std::pair<double, double> barrier_scan_fn(const UFn &u_of, double step) {
    double best_r = 0.0, best_u = 0.0;
    double r = step;
    for (int i = 0;; ++i, r += step) {
        const double u = u_of(r);
        if (u > best_u) {
            best_u = u;
            best_r = r;
        } else if (best_u > 0.0 && u < -2.0 * best_u &&
                   r > best_r + 8.0 * step) {
            break;
        }
        if (i >= 100000)
            throw BarrierNotFound("barrier scan did not terminate");
    }
    if (best_u <= 0.0)
        throw BarrierNotFound("U has no positive interior maximum");
    auto neg_u = [&](double R) { return -u_of(R); };
    auto [r_star, neg_val] =
        golden_section_min(neg_u, best_r - step, best_r + step, 1e-9);
    return {r_star, -neg_val};
}

inline std::pair<double, double> barrier_scan(const AnsatzFamily &a,
                                              double tol) {
    return barrier_scan_fn([&](double R) { return compute_U(a, R, tol); },
                           a.sigma() / 8.0);
}

/// Default R-grid for generic (K, U) evaluators: wide enough that U at
/// the edge is a factor `edge_depth` below -U_max, fine enough to resolve
/// the local de Broglie wavelength at the edge, the barrier region and
/// the harmonic ground state.
template <class KFn, class UFn>
GridSpec default_grid_fn(const KFn &k_of, const UFn &u_of, double step_scale,
                         bool even_in_radius, const GridPolicy &policy = {}) {
    auto [r_umax, u_max] = barrier_scan_fn(u_of, step_scale / 8.0);

    const double k0 = k_of(0.0);
    const double upp0 = detail::second_deriv_at_zero(u_of, 0.1 * r_umax);
    const double width = std::pow(k0 * upp0, -0.25);
    // The grid must also hold the tails of the initial states.
    const double state_reach =
        std::max(policy.state_halfwidths * width, policy.min_halfwidth);

    const double march = std::max(step_scale / 4.0, r_umax / 8.0);
    double edge = std::max(r_umax + march, state_reach);
    while (u_of(edge) > -policy.edge_depth * u_max)
        edge += march;

    const double k_edge = k_of(edge);
    const double u_edge = u_of(edge);
    const double lambda_edge =
        2.0 * std::numbers::pi / std::sqrt(2.0 * k_edge * std::abs(u_edge));

    double dx = lambda_edge / policy.points_per_wavelength;
    dx = std::min(dx, r_umax / 25.0);
    dx = std::min(dx, width / 16.0);

    const auto n_right = static_cast<std::size_t>(std::ceil(edge / dx));
    std::size_t n_left = n_right;
    if (!even_in_radius) {
        // One-sided family: U climbs for R < 0, so a moderate wall is
        // enough for the wave function to never reach the left edge.
        double wall = std::max(march, state_reach);
        while (u_of(-wall) < policy.wall_depth * u_max)
            wall += march;
        n_left = static_cast<std::size_t>(std::ceil(wall / dx));
    }
    GridSpec grid{-dx * static_cast<double>(n_left),
                  dx * static_cast<double>(n_right), n_left + n_right + 1};
    if (grid.n > policy.max_points)
        throw ValidationError(
            "default_grid: required resolution exceeds max_points (" +
            std::to_string(grid.n) + ")");
    return grid;
}

inline GridSpec default_grid(const AnsatzFamily &a, double tol,
                             const GridPolicy &policy = {}) {
    auto u_of = [&](double R) { return compute_U(a, R, tol); };
    auto k_of = [&](double R) { return compute_K(a, R, tol); };
    return default_grid_fn(k_of, u_of, a.sigma(), a.even_in_radius(),
                           policy);
}

/// Write the (R, K, U) table as CSV.
inline void write_reduced_csv(const ReducedSystem &rs,
                              const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path);
    out << "R,K,U\n";
    for (std::size_t i = 0; i < rs.grid.n; ++i)
        out << format_full(rs.grid.at(i)) << ',' << format_full(rs.k_table[i])
            << ',' << format_full(rs.u_table[i]) << '\n';
}

/// Load a reduced system back from CSV. Harmonic and barrier data are
/// re-derived from the table itself.
inline ReducedSystem read_reduced_csv(const std::string &path, unsigned dim,
                                      bool left_open_interior) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open: " + path);
    std::string line;
    std::getline(in, line); // header
    std::vector<double> r, k, u;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string field;
        double vals[3];
        for (int j = 0; j < 3; ++j) {
            if (!std::getline(ss, field, ','))
                throw ParseError(path + ": malformed CSV row: " + line);
            vals[j] = std::stod(field);
        }
        r.push_back(vals[0]);
        k.push_back(vals[1]);
        u.push_back(vals[2]);
    }
    if (r.size() < 3)
        throw ParseError(path + ": table too short");
    GridSpec grid{r.front(), r.back(), r.size()};
    return make_reduced_system(grid, std::move(k), std::move(u), dim,
                               left_open_interior);
}

} // namespace fvdecay
