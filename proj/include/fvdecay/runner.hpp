#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvdecay/ansatz.hpp"
#include "fvdecay/coldatom.hpp"
#include "fvdecay/config.hpp"
#include "fvdecay/errors.hpp"
#include "fvdecay/evolver.hpp"
#include "fvdecay/instanton.hpp"
#include "fvdecay/numutil.hpp"
#include "fvdecay/reduction.hpp"

namespace fvdecay {

/// Every number the automatic policies filled in, echoed into the run
/// metadata; feeding these values back as explicit configuration
/// reproduces the run bit-exactly.
struct ResolvedRun {
    double sigma = 0.0;
    GridSpec grid;
    double radial_max = 0.0;
    std::size_t radial_points = 0;
    double edge_depth = 0.0;
    EvolverConfig evolver;
    double t_final = 0.0;
    int n_levels = -1;
};

struct RunResult {
    ResolvedRun resolved;
    ReducedSystem system;
    DecayTrace trace;
    double s_e_field = 0.0;
    double s_e_reduced = 0.0;
    double s_e_shoot = 0.0;
    double s_e_shoot_plain = 0.0;
    double turning_point = 0.0;
    double statistic = 0.0;
    double expansion_validity = 0.0; // cold atom only
    std::vector<std::string> warnings;
    double wall_clock_seconds = 0.0;
};

namespace detail {

/// Rough decay-rate forecast from the reduced action, used only to size
/// the dissipation, the grid depth and the run length.
inline double rate_forecast(double u_max, double s_reduced) {
    return u_max * 12.0 *
           std::exp(-(s_reduced -
                      0.5 * std::log(s_reduced / (2.0 * std::numbers::pi))));
}

/// Dissipation strength scaled with the expected rate: strong enough to
/// absorb the outflow of fast decays, weak enough not to bias slow ones.
inline double gamma_policy(double rate_est) {
    return std::clamp(1e-6 * std::sqrt(rate_est / 1e-2), 5e-8, 5e-6);
}

inline double edge_depth_policy(double gamma) {
    return std::clamp(20.0 * std::pow(1e-6 / gamma, 1.0 / 3.0), 20.0, 80.0);
}

inline double t_final_policy(double rate_est) {
    double t = 20.0;
    // Lifetimes comparable to the run need the decay tracked further.
    if (rate_est * t > 0.5 && rate_est * t < 8.0)
        t = std::min(8.0 / rate_est, 120.0);
    return t;
}

inline void resolve_evolver(const RunConfig &cfg, ResolvedRun &rr,
                            const ReducedSystem &rs, double rate_est) {
    EvolverConfig &ev = rr.evolver;
    ev.gamma = cfg.raw.count("gamma") ? cfg.gamma
                                      : gamma_policy(rate_est);
    ev.t_final = cfg.t_final > 0.0 ? cfg.t_final : t_final_policy(rate_est);
    const double omega = std::sqrt(rs.upp0 / rs.k0);
    ev.smoothing_window = cfg.smoothing_window > 0.0
                              ? cfg.smoothing_window
                              : 2.0 * std::numbers::pi / omega;
    ev.output_interval = cfg.output_interval > 0.0
                             ? cfg.output_interval
                             : ev.smoothing_window / 16.0;
    ev.r0_scale = cfg.r0_scale > 0.0
                      ? cfg.r0_scale
                      : 2.0 * std::numbers::pi * harmonic_width(rs);
    ev.plateau_floor = cfg.plateau_floor;
    if (cfg.dt > 0.0) {
        ev.dt = cfg.dt;
    } else if (ev.gamma > 0.0) {
        const double dx = rs.grid.spacing();
        const double dt_band_center =
            std::pow(dx, 4) /
            (8.0 * std::pow(std::numbers::pi, 4) * ev.gamma);
        ev.dt = std::min(8.0 * dt_band_center, 1e-3);
        if (ev.dt < 0.1 * dt_band_center)
            ev.dt = 0.1 * dt_band_center;
    } else {
        ev.dt = 1e-3;
    }
    rr.t_final = ev.t_final;
}

inline GridSpec explicit_or(const RunConfig &cfg, GridSpec fallback) {
    if (cfg.grid_points > 0)
        return {cfg.grid_min, cfg.grid_max, cfg.grid_points};
    return fallback;
}

} // namespace detail

/// Reduce + instanton + evolve for the relativistic system. `tables`
/// short-circuits the reduction when a previously emitted table is
/// supplied.
inline RunResult run_single(const RunConfig &cfg, unsigned jobs,
                            const std::optional<ReducedSystem> &tables = {});

namespace detail {

inline AnsatzKind ansatz_kind(const std::string &name) {
    if (name == "symmetric")
        return AnsatzKind::Symmetric;
    if (name == "asymmetric")
        return AnsatzKind::Asymmetric;
    return AnsatzKind::RDependentWidth;
}

// Last field-level bounce, stashed for artifact emission by run paths
// that want it (kept out of RunResult to avoid copying large profiles).
inline thread_local BounceProfile write_profile_;

inline RunResult run_relativistic(const RunConfig &cfg, unsigned jobs,
                                  const std::optional<ReducedSystem> &tables) {
    RunResult res;
    ResolvedRun &rr = res.resolved;
    const ScalarPotential pot(cfg.eta, cfg.lambda);
    const AnsatzKind kind = ansatz_kind(cfg.ansatz);

    double s_reduced_coarse;
    if (cfg.sigma > 0.0) {
        rr.sigma = cfg.sigma;
        AnsatzFamily a0(kind, pot, rr.sigma, cfg.dim);
        auto [rum, umx] = barrier_scan(a0, cfg.quad_tol);
        GridSpec coarse{-(rum * 4.0), rum * 4.0, 481};
        s_reduced_coarse =
            solve_bounce_reduced(tabulate(a0, coarse, cfg.quad_tol, jobs),
                                 cfg.quad_tol)
                .action;
    } else {
        std::tie(rr.sigma, s_reduced_coarse) = optimize_sigma(
            AnsatzFamily(kind, pot, 0.5, cfg.dim), cfg.sigma_min,
            cfg.sigma_max, cfg.quad_tol, jobs);
    }
    const AnsatzFamily a(kind, pot, rr.sigma, cfg.dim);

    auto [rum, umx] = barrier_scan(a, cfg.quad_tol);
    const double rate_est = rate_forecast(umx, s_reduced_coarse);
    const double gamma_resolved =
        cfg.raw.count("gamma") ? cfg.gamma : gamma_policy(rate_est);
    rr.edge_depth = cfg.edge_depth > 0.0 ? cfg.edge_depth
                                         : edge_depth_policy(gamma_resolved);

    if (tables) {
        res.system = *tables;
        rr.grid = res.system.grid;
    } else {
        GridPolicy pol;
        pol.edge_depth = rr.edge_depth;
        if (cfg.temperature > 0.0)
            pol.state_halfwidths = 12.0; // room for excited-state tails
        rr.grid = explicit_or(cfg, default_grid(a, cfg.quad_tol, pol));
        res.system = tabulate(a, rr.grid, cfg.quad_tol, jobs);
    }
    const ReducedSystem &rs = res.system;

    auto bounce = solve_bounce_field(pot, cfg.dim, cfg.quad_tol);
    res.s_e_field = bounce.action;
    auto rb = solve_bounce_reduced(rs, cfg.quad_tol);
    res.s_e_reduced = rb.action;
    res.turning_point = rb.turning_point;
    res.s_e_shoot =
        shoot_bounce_reduced(rs, cfg.quad_tol, ReducedEom::Variational)
            .action;
    res.s_e_shoot_plain =
        shoot_bounce_reduced(rs, cfg.quad_tol, ReducedEom::PlainMassFlux)
            .action;

    detail::resolve_evolver(cfg, rr, rs, rate_est);
    if (harmonic_width(rs) > rs.r_umax / 3.0)
        res.warnings.push_back(
            "initial-state width " + format_full(harmonic_width(rs)) +
            " exceeds a third of the barrier radius; the harmonic "
            "approximation is marginal");

    if (cfg.temperature > 0.0) {
        rr.n_levels = cfg.n_levels >= 0
                          ? cfg.n_levels
                          : default_thermal_levels(rs, cfg.temperature);
        res.trace = thermal_trace(rs, rr.evolver, cfg.temperature,
                                  rr.n_levels, rr.grid, jobs);
    } else {
        res.trace = evolve(harmonic_state(rs, 0, rr.grid), rs, rr.evolver);
    }
    res.statistic =
        comparison_statistic(res.trace.plateau_gamma, rs, res.s_e_field);
    write_profile_ = std::move(bounce);
    return res;
}

inline RunResult run_coldatom(const RunConfig &cfg, unsigned jobs) {
    RunResult res;
    ResolvedRun &rr = res.resolved;
    CondensateModel m;
    m.g0 = cfg.g0;
    m.lam = cfg.lambda;
    m.eta_c = cfg.eta;
    m.rho_m = cfg.rho_m;
    m.winding = cfg.winding;
    m.sigma = cfg.sigma > 0.0 ? cfg.sigma : 1.0;
    m.validate();
    rr.sigma = m.sigma;

    auto u_of = [&](double R) {
        const GridSpec radial = condensate_r_grid(m, std::abs(R));
        const auto p = solve_profiles(m, R, radial, cfg.bvp_tol);
        return condensate_U(m, p);
    };
    auto k_of = [&](double R) {
        const GridSpec radial = condensate_r_grid(m, std::abs(R));
        const auto p = solve_profiles(m, R, radial, cfg.bvp_tol);
        return condensate_K(m, p);
    };
    double u_shift = 0.0;
    if (m.winding >= 1)
        u_shift = u_of(0.0);
    auto u_rel = [&](double R) { return u_of(R) - u_shift; };

    auto [rum, umx] = barrier_scan_fn(u_rel, m.sigma / 8.0);
    // Coarse reduced action for the policies, from a light tabulation.
    double s_coarse;
    {
        double edge = rum;
        while (u_rel(edge) > -0.5 * umx)
            edge += m.sigma / 4.0;
        GridSpec coarse{-edge, edge, 241};
        GridSpec radial = condensate_r_grid(m, edge);
        auto tabs = condensate_reduced_system(m, coarse, radial, cfg.bvp_tol,
                                              jobs);
        s_coarse = solve_bounce_reduced(tabs.system, cfg.quad_tol).action;
    }
    const double rate_est = rate_forecast(umx, s_coarse);
    const double gamma_resolved =
        cfg.raw.count("gamma") ? cfg.gamma : gamma_policy(rate_est);
    rr.edge_depth = cfg.edge_depth > 0.0 ? cfg.edge_depth
                                         : edge_depth_policy(gamma_resolved);

    GridPolicy pol;
    pol.edge_depth = rr.edge_depth;
    if (cfg.temperature > 0.0)
        pol.state_halfwidths = 12.0;
    rr.grid = explicit_or(cfg, default_grid_fn(k_of, u_rel, m.sigma,
                                               /*even=*/true, pol));
    GridSpec radial = cfg.radial_points > 0
                          ? GridSpec{0.0, cfg.radial_max, cfg.radial_points}
                          : condensate_r_grid(m, rr.grid.hi);
    rr.radial_max = radial.hi;
    rr.radial_points = radial.n;

    auto tabs =
        condensate_reduced_system(m, rr.grid, radial, cfg.bvp_tol, jobs);
    res.system = std::move(tabs.system);
    res.expansion_validity = tabs.expansion_validity;
    const ReducedSystem &rs = res.system;

    auto [s_field, profile] = condensate_field_action(m, cfg.quad_tol);
    res.s_e_field = s_field;
    auto rb = solve_bounce_reduced(rs, cfg.quad_tol);
    res.s_e_reduced = rb.action;
    res.turning_point = rb.turning_point;
    res.s_e_shoot =
        shoot_bounce_reduced(rs, cfg.quad_tol, ReducedEom::Variational)
            .action;
    res.s_e_shoot_plain =
        shoot_bounce_reduced(rs, cfg.quad_tol, ReducedEom::PlainMassFlux)
            .action;

    detail::resolve_evolver(cfg, rr, rs, rate_est);
    if (harmonic_width(rs) > rs.r_umax / 3.0)
        res.warnings.push_back(
            "initial-state width exceeds a third of the barrier radius");
    res.warnings.push_back("first-order density response validity: "
                           "max|gamma R'|/rho_F = " +
                           format_full(res.expansion_validity));

    if (cfg.temperature > 0.0) {
        rr.n_levels = cfg.n_levels >= 0
                          ? cfg.n_levels
                          : default_thermal_levels(rs, cfg.temperature);
        res.trace = thermal_trace(rs, rr.evolver, cfg.temperature,
                                  rr.n_levels, rr.grid, jobs);
    } else {
        res.trace = evolve(harmonic_state(rs, 0, rr.grid), rs, rr.evolver);
    }
    res.statistic =
        comparison_statistic(res.trace.plateau_gamma, rs, res.s_e_field);
    write_profile_ = std::move(profile);
    return res;
}

} // namespace detail

inline RunResult run_single(const RunConfig &cfg, unsigned jobs,
                            const std::optional<ReducedSystem> &tables) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res = cfg.system == SystemKind::ColdAtom
                        ? detail::run_coldatom(cfg, jobs)
                        : detail::run_relativistic(cfg, jobs, tables);
    res.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return res;
}

/// The field-level bounce profile of the most recent run on this thread.
inline const BounceProfile &last_bounce_profile() {
    return detail::write_profile_;
}

namespace detail {

inline nlohmann::ordered_json resolved_json(const RunConfig &cfg,
                                            const RunResult &res) {
    nlohmann::ordered_json j;
    j["system"] =
        cfg.system == SystemKind::ColdAtom ? "coldatom" : "relativistic";
    j["dim"] = cfg.dim;
    j["lambda"] = format_full(cfg.lambda);
    j["eta"] = format_full(cfg.eta);
    if (cfg.system == SystemKind::ColdAtom) {
        j["g0"] = format_full(cfg.g0);
        j["rho_m"] = format_full(cfg.rho_m);
        j["winding"] = cfg.winding;
    } else {
        j["ansatz"] = cfg.ansatz;
    }
    j["sigma"] = format_full(res.resolved.sigma);
    j["quad_tol"] = format_full(cfg.quad_tol);
    j["bvp_tol"] = format_full(cfg.bvp_tol);
    j["grid_min"] = format_full(res.resolved.grid.lo);
    j["grid_max"] = format_full(res.resolved.grid.hi);
    j["grid_points"] = res.resolved.grid.n;
    if (cfg.system == SystemKind::ColdAtom) {
        j["radial_max"] = format_full(res.resolved.radial_max);
        j["radial_points"] = res.resolved.radial_points;
    }
    j["edge_depth"] = format_full(res.resolved.edge_depth);
    j["dt"] = format_full(res.resolved.evolver.dt);
    j["gamma"] = format_full(res.resolved.evolver.gamma);
    j["t_final"] = format_full(res.resolved.evolver.t_final);
    j["r0_scale"] = format_full(res.resolved.evolver.r0_scale);
    j["smoothing_window"] =
        format_full(res.resolved.evolver.smoothing_window);
    j["output_interval"] = format_full(res.resolved.evolver.output_interval);
    j["plateau_floor"] = format_full(res.resolved.evolver.plateau_floor);
    j["temperature"] = format_full(cfg.temperature);
    if (cfg.temperature > 0.0)
        j["n_levels"] = res.resolved.n_levels;
    j["seed"] = cfg.seed;
    return j;
}

} // namespace detail

/// Emit trace.csv, reduced.csv, bounce.csv and meta.json into `dir`.
inline void write_artifacts(const RunConfig &cfg, const RunResult &res,
                            const std::string &dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_trace_csv(res.trace, dir + "/trace.csv");
    write_reduced_csv(res.system, dir + "/reduced.csv");
    write_bounce_csv(last_bounce_profile(), dir + "/bounce.csv");

    nlohmann::ordered_json meta;
    meta["config"] = cfg.raw;
    meta["resolved"] = detail::resolved_json(cfg, res);
    nlohmann::ordered_json prov;
    prov["k0"] = res.system.k0;
    prov["upp0"] = res.system.upp0;
    prov["r_umax"] = res.system.r_umax;
    prov["u_max"] = res.system.u_max;
    prov["omega"] = std::sqrt(res.system.upp0 / res.system.k0);
    prov["harmonic_width"] = harmonic_width(res.system);
    prov["s_e_field"] = res.s_e_field;
    prov["s_e_reduced"] = res.s_e_reduced;
    prov["s_e_shoot"] = res.s_e_shoot;
    prov["s_e_shoot_plain_eom"] = res.s_e_shoot_plain;
    prov["turning_point"] = res.turning_point;
    prov["gamma_plateau"] = res.trace.plateau_gamma;
    prov["plateau_std"] = res.trace.plateau_std;
    prov["plateau_converged"] = res.trace.plateau_converged;
    prov["statistic"] = res.statistic;
    if (cfg.system == SystemKind::ColdAtom)
        prov["expansion_validity"] = res.expansion_validity;
    meta["provenance"] = prov;
    meta["warnings"] = res.warnings;
    meta["outputs"] = {{"trace", "trace.csv"},
                       {"reduced", "reduced.csv"},
                       {"bounce", "bounce.csv"}};
    meta["partial"] = false;
    meta["wall_clock_seconds"] = res.wall_clock_seconds;
    std::ofstream out(dir + "/meta.json", std::ios::binary);
    out << meta.dump(2) << '\n';
}

struct SweepRow {
    double lambda = 0.0;
    double eta = 0.0;
    double sigma_opt = 0.0;
    double s_e = 0.0;
    double u_max = 0.0;
    double gamma_plateau = 0.0;
    double statistic = 0.0;
    std::string error;
};

/// Per-point single runs over the (lambda, eta) grid; failures become
/// rows with an error message and the sweep continues.
inline std::vector<SweepRow> run_sweep(const RunConfig &cfg, unsigned jobs,
                                       const std::string &out_dir) {
    if (cfg.lambda_values.empty() || cfg.eta_values.empty())
        throw ValidationError(
            "sweep requires lambda_values and eta_values");
    const std::size_t n_pts =
        cfg.lambda_values.size() * cfg.eta_values.size();
    std::vector<SweepRow> rows(n_pts);
    const unsigned outer = jobs == 0 ? default_jobs() : jobs;
    parallel_for(n_pts, outer, [&](std::size_t idx) {
        const double lam = cfg.lambda_values[idx / cfg.eta_values.size()];
        const double eta = cfg.eta_values[idx % cfg.eta_values.size()];
        SweepRow &row = rows[idx];
        row.lambda = lam;
        row.eta = eta;
        RunConfig point = cfg;
        point.lambda = lam;
        point.eta = eta;
        point.lambda_values.clear();
        point.eta_values.clear();
        point.raw["lambda"] = format_full(lam);
        point.raw["eta"] = format_full(eta);
        try {
            const RunResult r = run_single(point, 1);
            row.sigma_opt = r.resolved.sigma;
            row.s_e = r.s_e_field;
            row.u_max = r.system.u_max;
            row.gamma_plateau = r.trace.plateau_gamma;
            row.statistic = r.statistic;
            if (!out_dir.empty()) {
                char name[64];
                std::snprintf(name, sizeof(name), "lam%g_eta%g", lam, eta);
                write_artifacts(point, r, out_dir + "/" + name);
            }
        } catch (const std::exception &e) {
            row.error = e.what();
        }
    });
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow> &rows,
                            const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path);
    out << "lambda,eta,sigma_opt,S_E,U_max,gamma_plateau,statistic,error\n";
    for (const auto &r : rows) {
        out << format_full(r.lambda) << ',' << format_full(r.eta) << ',';
        if (r.error.empty()) {
            out << format_full(r.sigma_opt) << ',' << format_full(r.s_e)
                << ',' << format_full(r.u_max) << ','
                << format_full(r.gamma_plateau) << ','
                << format_full(r.statistic) << ',';
        } else {
            out << ",,,,,";
        }
        std::string msg = r.error;
        for (auto &c : msg)
            if (c == ',' || c == '\n')
                c = ';';
        out << msg << '\n';
    }
}

} // namespace fvdecay
