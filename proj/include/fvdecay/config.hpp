#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fvdecay/errors.hpp"

namespace fvdecay {

enum class SystemKind { Relativistic, ColdAtom };

/// Fully parsed run configuration. Fields left at 0 (or -1 where 0 is
/// meaningful) are resolved to concrete values by the runner; every
/// resolved value is echoed into the run metadata so a run can be
/// reproduced bit-exactly from its own output.
struct RunConfig {
    SystemKind system = SystemKind::Relativistic;
    unsigned dim = 2;

    // Potential / model parameters. `lambda` and `eta` name the
    // asymmetry and barrier-scale couplings in both systems.
    double lambda = 0.0;
    double eta = 0.0;
    double g0 = 1.0;
    double rho_m = 1.0;
    unsigned winding = 0;

    std::string ansatz = "symmetric"; // symmetric | asymmetric | rwidth
    double sigma = 0.0;               // 0: optimize
    double sigma_min = 0.15;
    double sigma_max = 1.6;

    double quad_tol = 1e-9;
    double bvp_tol = 1e-10;

    double grid_min = 0.0, grid_max = 0.0; // 0/0: auto
    std::size_t grid_points = 0;
    double radial_max = 0.0; // cold-atom r-grid, 0: auto
    std::size_t radial_points = 0;
    double edge_depth = 0.0; // 0: auto (scales with 1/gamma^{1/3})

    double dt = 0.0; // 0: auto from the dissipation tuning
    double gamma = 5e-8;
    double t_final = 0.0; // 0: auto (20 relativistic, 300 cold atom)
    double r0_scale = 0.0;
    double smoothing_window = 0.0;
    double output_interval = 0.0;
    double plateau_floor = 0.2;

    double temperature = 0.0;
    int n_levels = -1; // highest thermal level, -1: auto

    std::vector<double> lambda_values; // sweep
    std::vector<double> eta_values;

    std::string out_dir = "out";
    unsigned jobs = 0;
    unsigned long seed = 0; // reserved; runs are deterministic

    std::map<std::string, std::string> raw; // as parsed, for echoing
};

namespace detail {

inline std::string trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string &key, const std::string &v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return x;
    } catch (const std::exception &) {
        throw ParseError("config key '" + key + "': not a number: " + v);
    }
}

inline unsigned long parse_unsigned(const std::string &key,
                                    const std::string &v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size() || x < 0)
            throw std::invalid_argument(v);
        return static_cast<unsigned long>(x);
    } catch (const std::exception &) {
        throw ParseError("config key '" + key +
                         "': not a non-negative integer: " + v);
    }
}

inline std::vector<double> parse_list(const std::string &key,
                                      const std::string &v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(parse_double(key, item));
    }
    return out;
}

} // namespace detail

/// Apply one `key = value` assignment. Unknown keys are errors.
inline void apply_key(RunConfig &cfg, const std::string &key,
                      const std::string &value) {
    using detail::parse_double;
    using detail::parse_list;
    using detail::parse_unsigned;
    if (key == "system") {
        if (value == "relativistic")
            cfg.system = SystemKind::Relativistic;
        else if (value == "coldatom")
            cfg.system = SystemKind::ColdAtom;
        else
            throw ParseError(
                "config key 'system': expected relativistic|coldatom, got " +
                value);
    } else if (key == "dim") {
        cfg.dim = static_cast<unsigned>(parse_unsigned(key, value));
    } else if (key == "lambda") {
        cfg.lambda = parse_double(key, value);
    } else if (key == "eta") {
        cfg.eta = parse_double(key, value);
    } else if (key == "g0") {
        cfg.g0 = parse_double(key, value);
    } else if (key == "rho_m") {
        cfg.rho_m = parse_double(key, value);
    } else if (key == "winding") {
        cfg.winding = static_cast<unsigned>(parse_unsigned(key, value));
    } else if (key == "ansatz") {
        if (value != "symmetric" && value != "asymmetric" &&
            value != "rwidth")
            throw ParseError("config key 'ansatz': expected "
                             "symmetric|asymmetric|rwidth, got " +
                             value);
        cfg.ansatz = value;
    } else if (key == "sigma") {
        cfg.sigma = value == "optimize" ? 0.0 : parse_double(key, value);
    } else if (key == "sigma_min") {
        cfg.sigma_min = parse_double(key, value);
    } else if (key == "sigma_max") {
        cfg.sigma_max = parse_double(key, value);
    } else if (key == "quad_tol") {
        cfg.quad_tol = parse_double(key, value);
    } else if (key == "bvp_tol") {
        cfg.bvp_tol = parse_double(key, value);
    } else if (key == "grid_min") {
        cfg.grid_min = parse_double(key, value);
    } else if (key == "grid_max") {
        cfg.grid_max = parse_double(key, value);
    } else if (key == "grid_points") {
        cfg.grid_points = parse_unsigned(key, value);
    } else if (key == "radial_max") {
        cfg.radial_max = parse_double(key, value);
    } else if (key == "radial_points") {
        cfg.radial_points = parse_unsigned(key, value);
    } else if (key == "edge_depth") {
        cfg.edge_depth = parse_double(key, value);
    } else if (key == "dt") {
        cfg.dt = value == "auto" ? 0.0 : parse_double(key, value);
    } else if (key == "gamma") {
        cfg.gamma = parse_double(key, value);
    } else if (key == "t_final") {
        cfg.t_final = parse_double(key, value);
    } else if (key == "r0_scale") {
        cfg.r0_scale = value == "auto" ? 0.0 : parse_double(key, value);
    } else if (key == "smoothing_window") {
        cfg.smoothing_window =
            value == "auto" ? 0.0 : parse_double(key, value);
    } else if (key == "output_interval") {
        cfg.output_interval =
            value == "auto" ? 0.0 : parse_double(key, value);
    } else if (key == "plateau_floor") {
        cfg.plateau_floor = parse_double(key, value);
    } else if (key == "temperature") {
        cfg.temperature = parse_double(key, value);
    } else if (key == "n_levels") {
        cfg.n_levels = value == "auto"
                           ? -1
                           : static_cast<int>(parse_unsigned(key, value));
    } else if (key == "lambda_values") {
        cfg.lambda_values = parse_list(key, value);
    } else if (key == "eta_values") {
        cfg.eta_values = parse_list(key, value);
    } else if (key == "out") {
        cfg.out_dir = value;
    } else if (key == "jobs") {
        cfg.jobs = static_cast<unsigned>(parse_unsigned(key, value));
    } else if (key == "seed") {
        cfg.seed = parse_unsigned(key, value);
    } else {
        throw ParseError("unknown config key: " + key);
    }
    cfg.raw[key] = value;
}

/// Check every constraint and report all violations at once.
inline void validate_config(const RunConfig &cfg) {
    std::vector<std::string> bad;
    if (!(cfg.lambda > 0.0))
        bad.push_back("lambda must be positive");
    if (!(cfg.eta > 0.0))
        bad.push_back("eta must be positive");
    if (cfg.dim < 1 || cfg.dim > 3)
        bad.push_back("dim must be 1, 2 or 3");
    if (cfg.sigma < 0.0)
        bad.push_back("sigma must be positive or 'optimize'");
    if (cfg.sigma == 0.0 && !(cfg.sigma_min > 0.0 &&
                              cfg.sigma_max > cfg.sigma_min))
        bad.push_back("sigma_min/sigma_max must bracket the optimization");
    if (!(cfg.quad_tol > 0.0))
        bad.push_back("quad_tol must be positive");
    if (!(cfg.bvp_tol > 0.0))
        bad.push_back("bvp_tol must be positive");
    if (cfg.gamma < 0.0)
        bad.push_back("gamma must be non-negative");
    if (cfg.t_final < 0.0)
        bad.push_back("t_final must be positive");
    if (cfg.dt < 0.0)
        bad.push_back("dt must be positive or 'auto'");
    if (cfg.temperature < 0.0)
        bad.push_back("temperature must be non-negative");
    if (!(cfg.plateau_floor >= 0.0 && cfg.plateau_floor < 1.0))
        bad.push_back("plateau_floor must lie in [0, 1)");
    if (cfg.system == SystemKind::ColdAtom) {
        if (!(cfg.g0 > 0.0))
            bad.push_back("g0 must be positive");
        if (!(cfg.rho_m > 0.0))
            bad.push_back("rho_m must be positive");
        if (cfg.g0 > 0.0 && cfg.rho_m > 0.0 && cfg.lambda > 0.0) {
            if (!(cfg.lambda < 2.0 * cfg.g0 * cfg.rho_m))
                bad.push_back("false-vacuum existence requires lambda < 2 "
                              "g0 rho_m");
            else if (!(cfg.eta >
                       cfg.g0 / (2.0 * (cfg.g0 * cfg.rho_m - cfg.lambda))))
                bad.push_back("false-vacuum existence requires eta > g0 / "
                              "(2 (g0 rho_m - lambda))");
        }
        if (cfg.dim != 2)
            bad.push_back("the cold-atom system is two-dimensional");
    }
    if (!bad.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto &b : bad)
            msg += "\n  - " + b;
        throw ValidationError(msg);
    }
}

/// Parse a key = value configuration file (# starts a comment).
inline RunConfig parse_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (cfg.raw.count(key))
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": duplicate key: " + key);
        try {
            apply_key(cfg, key, value);
        } catch (const ParseError &e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " +
                             e.what());
        }
    }
    validate_config(cfg);
    return cfg;
}

/// Apply a `key=value` command-line override.
inline void apply_override(RunConfig &cfg, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ParseError("override must have the form key=value: " +
                         assignment);
    apply_key(cfg, detail::trim(assignment.substr(0, eq)),
              detail::trim(assignment.substr(eq + 1)));
}

} // namespace fvdecay
