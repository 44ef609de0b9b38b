#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "fvdecay/errors.hpp"
#include "fvdecay/interp.hpp"
#include "fvdecay/numutil.hpp"
#include "fvdecay/parallel.hpp"
#include "fvdecay/reduction.hpp"

namespace fvdecay {

using Complex = std::complex<double>;

/// Complex amplitudes of the collective-coordinate wave function on a
/// uniform R-grid.
struct WaveState {
    std::vector<Complex> amplitudes;
    GridSpec grid;
    double time = 0.0;

    double norm() const {
        double s = 0.0;
        for (const auto &a : amplitudes)
            s += std::norm(a);
        return s * grid.spacing();
    }
};

struct EvolverConfig {
    double dt = 1e-3;
    double gamma = 0.0;       // hyperdiffusion strength
    double t_final = 20.0;
    double r0_scale = 0.0;    // shortest wavelength that must survive
    double smoothing_window = 1.0;
    double output_interval = 0.0; // 0: dt
    // Survival level below which the decay is treated as over; the
    // late-time rate is read off just before this point. Only fast
    // decays (lifetime shorter than the run) ever reach it.
    double plateau_floor = 0.2;
};

/// Survival probability and instantaneous decay rate time series.
struct DecayTrace {
    std::vector<double> times;
    std::vector<double> p_false;
    std::vector<double> gamma_inst;
    double plateau_gamma = 0.0; // mean of Gamma over the last fifth
    double plateau_std = 0.0;
    bool plateau_converged = false;
};

/// Width (K(0) U''(0))^(-1/4) of the harmonic ground state.
inline double harmonic_width(const ReducedSystem &rs) {
    return std::pow(rs.k0 * rs.upp0, -0.25);
}

/// n-th eigenstate of the harmonic approximation around R = 0, normalized
/// on the discrete grid. Throws GridTooNarrow when the state has not
/// decayed below 1e-12 at the grid edges.
inline WaveState harmonic_state(const ReducedSystem &rs, unsigned n,
                                const GridSpec &grid) {
    const double alpha = std::sqrt(rs.k0 * rs.upp0);
    WaveState ws;
    ws.grid = grid;
    ws.amplitudes.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double R = grid.at(i);
        const double x = std::sqrt(alpha) * R;
        // Normalized Hermite-function recurrence, stable for large n.
        double h_prev = 0.0;
        double h = std::pow(alpha / std::numbers::pi, 0.25) *
                   std::exp(-0.5 * x * x);
        for (unsigned k = 0; k < n; ++k) {
            const double h_next =
                std::sqrt(2.0 / (k + 1.0)) * x * h -
                std::sqrt(static_cast<double>(k) / (k + 1.0)) * h_prev;
            h_prev = h;
            h = h_next;
        }
        ws.amplitudes[i] = h;
    }
    double nrm = std::sqrt(ws.norm());
    if (!(nrm > 0.0) || !std::isfinite(nrm))
        throw GridTooNarrow("harmonic_state: state vanishes on the grid");
    for (auto &a : ws.amplitudes)
        a /= nrm;
    const double edge = std::max(std::abs(ws.amplitudes.front()),
                                 std::abs(ws.amplitudes.back()));
    if (edge > 1e-12)
        throw GridTooNarrow(
            "harmonic_state: grid too narrow, edge amplitude " +
            std::to_string(edge));
    ws.time = 0.0;
    return ws;
}

/// Integral of |psi|^2 over the barrier-interior region of the reduced
/// system (trapezoidal, with fractional end cells).
inline double prob_false(const WaveState &ws, const ReducedSystem &rs) {
    const auto [lo, hi] = rs.interior_bounds();
    const double h = ws.grid.spacing();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < ws.grid.n; ++i) {
        const double xa = ws.grid.at(i), xb = ws.grid.at(i + 1);
        const double a = std::max(xa, lo), b = std::min(xb, hi);
        if (b <= a)
            continue;
        const double fa = std::norm(ws.amplitudes[i]);
        const double fb = std::norm(ws.amplitudes[i + 1]);
        const double ta = (a - xa) / h, tb = (b - xa) / h;
        const double va = fa + (fb - fa) * ta;
        const double vb = fa + (fb - fa) * tb;
        s += 0.5 * (va + vb) * (b - a);
    }
    return s;
}

namespace detail {

/// Real tridiagonal Hamiltonian of the reduced Schroedinger operator in
/// flux form, with the mass interpolated to cell midpoints. Zero boundary
/// values are imposed just outside the grid.
struct Hamiltonian {
    std::vector<double> diag;
    std::vector<double> off; // off[i] couples node i and i+1

    static Hamiltonian build(const ReducedSystem &rs, const GridSpec &grid) {
        Hamiltonian h;
        const std::size_t n = grid.n;
        const double dx2 = grid.spacing() * grid.spacing();
        std::vector<double> a_half(n + 1); // 1/(2 K) at midpoints
        for (std::size_t i = 0; i + 1 < n; ++i)
            a_half[i + 1] = 1.0 / (rs.k_table[i] + rs.k_table[i + 1]);
        a_half[0] = 0.5 / rs.k_table.front();
        a_half[n] = 0.5 / rs.k_table.back();
        h.diag.resize(n);
        h.off.resize(n - 1);
        for (std::size_t i = 0; i < n; ++i)
            h.diag[i] = (a_half[i] + a_half[i + 1]) / dx2 + rs.u_table[i];
        for (std::size_t i = 0; i + 1 < n; ++i)
            h.off[i] = -a_half[i + 1] / dx2;
        return h;
    }
};

} // namespace detail

/// Check the hyperdiffusion tuning for a given grid spacing. Returns
/// {grid-scale damping per step, protected-scale damping over the run};
/// the first must land in [0.1, 10], the second below 0.1.
inline std::pair<double, double> dissipation_tuning(const EvolverConfig &cfg,
                                                    double dx) {
    const double pi4 = std::pow(std::numbers::pi, 4);
    const double c_grid =
        0.5 * cfg.gamma * 16.0 * pi4 / std::pow(dx, 4) * cfg.dt;
    const double c_protected =
        cfg.r0_scale > 0.0
            ? 0.5 * cfg.gamma * 16.0 * pi4 / std::pow(cfg.r0_scale, 4) *
                  cfg.t_final
            : 0.0;
    return {c_grid, c_protected};
}

inline void validate_dissipation(const EvolverConfig &cfg, double dx) {
    if (cfg.gamma <= 0.0)
        return;
    auto [c_grid, c_protected] = dissipation_tuning(cfg, dx);
    if (c_grid < 0.1 || c_grid > 10.0)
        throw ValidationError(
            "dissipation tuning: (gamma/2)(16 pi^4/dx^4) dt = " +
            std::to_string(c_grid) + " outside [0.1, 10]");
    if (!(cfg.r0_scale > 0.0))
        throw ValidationError(
            "dissipation tuning: r0_scale must be positive when gamma > 0");
    if (c_protected >= 0.1)
        throw ValidationError(
            "dissipation tuning: (gamma/2)(16 pi^4/R0^4) t_final = " +
            std::to_string(c_protected) + " must stay below 0.1");
}

/// Implicit-midpoint propagator for the reduced Schroedinger equation
/// with optional hyperdiffusion. The update
///
///   (1 + i dt H / 2 + dt gamma D4 / 4) psi' =
///   (1 - i dt H / 2 - dt gamma D4 / 4) psi
///
/// is solved with a banded LU factorization computed once; with gamma = 0
/// it is the exact Cayley transform of the Hermitian H and conserves the
/// discrete norm.
class SchrodingerEvolver {
  public:
    SchrodingerEvolver(const ReducedSystem &rs, const GridSpec &grid,
                       const EvolverConfig &cfg)
        : cfg_(cfg), grid_(grid) {
        if (!(grid == rs.grid))
            throw ValidationError(
                "SchrodingerEvolver: state grid must match the tabulation");
        validate_dissipation(cfg, grid.spacing());
        h_ = detail::Hamiltonian::build(rs, grid);
        assemble();
    }

    const detail::Hamiltonian &hamiltonian() const { return h_; }
    const EvolverConfig &config() const { return cfg_; }

    void step(WaveState &ws) {
        const std::size_t n = grid_.n;
        if (ws.amplitudes.size() != n)
            throw ValidationError("step: state size mismatch");
        Eigen::VectorXcd rhs(n);
        // rhs = B psi with B banded (two sub/super diagonals).
        for (std::size_t i = 0; i < n; ++i) {
            Complex v = b_diag_[i] * ws.amplitudes[i];
            if (i >= 1)
                v += b_off1_[i - 1] * ws.amplitudes[i - 1];
            if (i + 1 < n)
                v += b_off1_[i] * ws.amplitudes[i + 1];
            if (i >= 2)
                v += b_off2_ * ws.amplitudes[i - 2];
            if (i + 2 < n)
                v += b_off2_ * ws.amplitudes[i + 2];
            rhs[static_cast<Eigen::Index>(i)] = v;
        }
        const double norm_before = ws.norm();
        Eigen::VectorXcd sol = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success)
            throw LinearSolveFailure("implicit step: banded solve failed");
        for (std::size_t i = 0; i < n; ++i)
            ws.amplitudes[i] = sol[static_cast<Eigen::Index>(i)];
        ws.time += cfg_.dt;
        const double norm_after = ws.norm();
        if (!std::isfinite(norm_after))
            throw StabilityViolation("non-finite amplitudes after step");
        if (cfg_.gamma == 0.0 &&
            norm_after > norm_before * (1.0 + 1e-6))
            throw StabilityViolation("norm grew by more than 1e-6 in one "
                                     "step at gamma = 0");
    }

  private:
    void assemble() {
        const std::size_t n = grid_.n;
        const double dx4 = std::pow(grid_.spacing(), 4);
        const double g = cfg_.dt * cfg_.gamma / (4.0 * dx4);
        const Complex ih(0.0, 0.5 * cfg_.dt);

        b_diag_.resize(n);
        b_off1_.resize(n - 1);
        for (std::size_t i = 0; i < n; ++i)
            b_diag_[i] = 1.0 - ih * h_.diag[i] - 6.0 * g;
        for (std::size_t i = 0; i + 1 < n; ++i)
            b_off1_[i] = -ih * h_.off[i] + 4.0 * g;
        b_off2_ = -g;

        using Trip = Eigen::Triplet<Complex>;
        std::vector<Trip> trips;
        trips.reserve(5 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto I = static_cast<Eigen::Index>(i);
            trips.emplace_back(I, I, 1.0 + ih * h_.diag[i] + 6.0 * g);
            if (i + 1 < n) {
                const Complex c = ih * h_.off[i] - 4.0 * g;
                trips.emplace_back(I, I + 1, c);
                trips.emplace_back(I + 1, I, c);
            }
            if (i + 2 < n) {
                trips.emplace_back(I, I + 2, Complex(g));
                trips.emplace_back(I + 2, I, Complex(g));
            }
        }
        Eigen::SparseMatrix<Complex> A(static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(n));
        A.setFromTriplets(trips.begin(), trips.end());
        A.makeCompressed();
        lu_.compute(A);
        if (lu_.info() != Eigen::Success)
            throw LinearSolveFailure("implicit step: factorization failed");
    }

    EvolverConfig cfg_;
    GridSpec grid_;
    detail::Hamiltonian h_;
    std::vector<Complex> b_diag_;
    std::vector<Complex> b_off1_;
    Complex b_off2_;
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_;
};

/// Single implicit step (convenience wrapper; repeated stepping should
/// reuse a SchrodingerEvolver).
inline WaveState step(const WaveState &ws, const ReducedSystem &rs,
                      const EvolverConfig &cfg) {
    SchrodingerEvolver ev(rs, ws.grid, cfg);
    WaveState out = ws;
    ev.step(out);
    return out;
}

namespace detail {

/// Gamma(t) = -d ln P_F / dt by a centered least-squares slope over a
/// window of the given width.
inline std::vector<double> gamma_from_pf(const std::vector<double> &t,
                                         const std::vector<double> &pf,
                                         double window) {
    const std::size_t n = t.size();
    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i)
        logp[i] = std::log(std::max(pf[i], 1e-300));
    std::vector<double> out(n, 0.0);
    std::size_t a = 0, b = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (a < n && t[k] - t[a] > 0.5 * window)
            ++a;
        while (b < n && t[b] - t[k] <= 0.5 * window)
            ++b;
        if (b - a >= 2)
            out[k] = -lsq_slope(t, logp, a, b);
        else if (n >= 2)
            out[k] = k + 1 < n
                         ? -(logp[k + 1] - logp[k]) / (t[k + 1] - t[k])
                         : -(logp[k] - logp[k - 1]) / (t[k] - t[k - 1]);
    }
    return out;
}

inline void finalize_trace(DecayTrace &tr, double plateau_floor) {
    std::size_t n = tr.gamma_inst.size();
    if (n < 5)
        return;
    // Read the rate off while a meaningful fraction still survives.
    for (std::size_t i = 5; i < n; ++i) {
        if (tr.p_false[i] < plateau_floor) {
            n = i;
            break;
        }
    }
    const std::size_t first = n - std::max<std::size_t>(n / 5, 2);
    tr.plateau_gamma = mean(tr.gamma_inst, first, n);
    tr.plateau_std = stddev(tr.gamma_inst, first, n);
    tr.plateau_converged =
        tr.plateau_std < 0.1 * std::abs(tr.plateau_gamma);
}

} // namespace detail

/// Propagate an initial state to t_final, recording the survival
/// probability at every output interval and extracting Gamma(t) from the
/// smoothed log-slope.
inline DecayTrace evolve(const WaveState &initial, const ReducedSystem &rs,
                         const EvolverConfig &cfg) {
    SchrodingerEvolver ev(rs, initial.grid, cfg);
    WaveState ws = initial;
    const double out_dt =
        cfg.output_interval > 0.0 ? cfg.output_interval : cfg.dt;
    const auto out_every =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround(out_dt / cfg.dt)));
    const auto n_steps =
        static_cast<std::size_t>(std::ceil(cfg.t_final / cfg.dt));
    DecayTrace tr;
    tr.times.push_back(ws.time);
    tr.p_false.push_back(prob_false(ws, rs));
    for (std::size_t s = 1; s <= n_steps; ++s) {
        ev.step(ws);
        if (s % out_every == 0 || s == n_steps) {
            tr.times.push_back(ws.time);
            tr.p_false.push_back(prob_false(ws, rs));
        }
    }
    tr.gamma_inst =
        detail::gamma_from_pf(tr.times, tr.p_false, cfg.smoothing_window);
    detail::finalize_trace(tr, cfg.plateau_floor);
    return tr;
}

/// Boltzmann weights exp(-n omega / T) for the harmonic levels, truncated
/// at n_max inclusive and renormalized. Throws TruncationInsufficient when
/// the weight that the first discarded level would carry exceeds 1e-3.
inline std::vector<double> thermal_weights(const ReducedSystem &rs,
                                           double temperature, int n_max) {
    const double omega = std::sqrt(rs.upp0 / rs.k0);
    const double q = std::exp(-omega / temperature);
    std::vector<double> w(static_cast<std::size_t>(n_max) + 1);
    double sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        w[static_cast<std::size_t>(n)] = std::pow(q, n);
        sum += w[static_cast<std::size_t>(n)];
    }
    if (std::pow(q, n_max + 1) / sum > 1e-3)
        throw TruncationInsufficient(
            "thermal_weights: level " + std::to_string(n_max + 1) +
            " would still carry more than 1e-3 of the weight");
    for (auto &x : w)
        x /= sum;
    return w;
}

/// Smallest truncation level that keeps the discarded weight below 1e-3.
inline int default_thermal_levels(const ReducedSystem &rs,
                                  double temperature) {
    const double omega = std::sqrt(rs.upp0 / rs.k0);
    const double q = std::exp(-omega / temperature);
    int n = 0;
    double sum = 1.0, next = q;
    while (next / sum > 1e-3) {
        sum += next;
        next *= q;
        ++n;
        if (n > 100000)
            throw TruncationInsufficient(
                "default_thermal_levels: temperature too high for a "
                "harmonic truncation");
    }
    return n;
}

/// Mixed-state evolution: every harmonic level up to n_max is propagated
/// independently and the survival probabilities are averaged with
/// Boltzmann weights; Gamma is extracted from the averaged P_F. Levels
/// run in parallel, each owning its wave state.
inline DecayTrace thermal_trace(const ReducedSystem &rs,
                                const EvolverConfig &cfg, double temperature,
                                int n_max, const GridSpec &grid,
                                unsigned jobs = 1) {
    if (n_max < 0)
        n_max = default_thermal_levels(rs, temperature);
    const auto weights = thermal_weights(rs, temperature, n_max);
    std::vector<DecayTrace> traces(weights.size());
    parallel_for(weights.size(), jobs, [&](std::size_t n) {
        const WaveState psi_n =
            harmonic_state(rs, static_cast<unsigned>(n), grid);
        traces[n] = evolve(psi_n, rs, cfg);
    });
    DecayTrace tr;
    tr.times = traces.front().times;
    tr.p_false.assign(tr.times.size(), 0.0);
    for (std::size_t n = 0; n < weights.size(); ++n)
        for (std::size_t k = 0; k < tr.times.size(); ++k)
            tr.p_false[k] += weights[n] * traces[n].p_false[k];
    tr.gamma_inst =
        detail::gamma_from_pf(tr.times, tr.p_false, cfg.smoothing_window);
    detail::finalize_trace(tr, cfg.plateau_floor);
    return tr;
}

/// Write a decay trace as CSV (t, P_F, Gamma).
inline void write_trace_csv(const DecayTrace &tr, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path);
    out << "t,P_F,Gamma\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        out << format_full(tr.times[i]) << ',' << format_full(tr.p_false[i])
            << ',' << format_full(tr.gamma_inst[i]) << '\n';
}

} // namespace fvdecay
