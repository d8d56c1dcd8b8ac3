#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sburgers/config.hpp"
#include "sburgers/fbsde.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/problem.hpp"

namespace sburgers {

/// Everything a CLI run needs, assembled from one scenario config.
struct Scenario {
    BurgersProblem problem;
    SpatialGrid grid;
    TimeGrid time;
    McParams mc;
    WindowPolicy window;
    std::uint64_t noise_seed = 42;
    int deriv_order = 4;
};

namespace detail {

inline std::vector<double> broadcast(std::vector<double> v, std::size_t count,
                                     const std::string& field) {
    if (v.empty()) v.assign(count, 0.0);
    if (v.size() == 1) v.assign(count, v[0]);
    if (v.size() != count)
        throw ConfigError("field '" + field + "': expected 1 or " + std::to_string(count) +
                              " entries, got " + std::to_string(v.size()),
                          0, field);
    return v;
}

/// Wave vectors from integer mode numbers so trigonometric presets stay
/// periodic on the configured box: wave = 2 pi mode / period per axis.
inline std::vector<SineChannel> sine_channels(const Config& cfg, const std::string& section,
                                              std::size_t channels, std::size_t dim,
                                              const std::vector<AxisSpec>& domain) {
    auto amp = broadcast(cfg.get_double_list(section, "amp", {}), channels, section + ".amp");
    auto phase = broadcast(cfg.get_double_list(section, "phase", {}), channels, section + ".phase");
    auto mode =
        broadcast(cfg.get_double_list(section, "mode", {1.0}), channels * dim, section + ".mode");
    std::vector<SineChannel> out(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        out[c].amp = amp[c];
        out[c].phase = phase[c];
        out[c].wave.resize(dim);
        for (std::size_t a = 0; a < dim; ++a) {
            const double period = domain[a].hi - domain[a].lo;
            out[c].wave[a] = 2.0 * std::numbers::pi * mode[c * dim + a] / period;
        }
    }
    return out;
}

}  // namespace detail

inline Scenario load_scenario(const Config& cfg) {
    Scenario sc;
    BurgersProblem& p = sc.problem;

    p.dim = static_cast<std::size_t>(cfg.get_int("problem", "dimension", 1));
    p.noise_dim = static_cast<std::size_t>(cfg.get_int("problem", "noise_dim", 1));
    p.viscosity = cfg.require_double("problem", "viscosity");
    p.horizon = cfg.require_double("problem", "horizon");
    p.holder_beta = cfg.get_double("problem", "beta", 0.5);

    const std::string domain_kind = cfg.get_string("problem", "domain", "periodic");
    if (domain_kind == "periodic") p.boundary = BoundaryMode::periodic;
    else if (domain_kind == "box") p.boundary = BoundaryMode::box;
    else throw ConfigError("field 'problem.domain': unknown mode '" + domain_kind + "'", 0,
                           "problem.domain");
    auto lo = detail::broadcast(cfg.get_double_list("problem", "domain_lo", {-1.0}), p.dim,
                                "problem.domain_lo");
    auto hi = detail::broadcast(cfg.get_double_list("problem", "domain_hi", {1.0}), p.dim,
                                "problem.domain_hi");
    p.domain.resize(p.dim);
    for (std::size_t a = 0; a < p.dim; ++a) p.domain[a] = {lo[a], hi[a], 8};

    // initial condition
    const std::string hkind = cfg.get_string("initial", "preset", "zero");
    if (hkind == "zero") {
        p.h = h_zero(p.dim);
    } else if (hkind == "constant") {
        p.h = h_constant(p.dim, detail::broadcast(cfg.get_double_list("initial", "value", {0.0}),
                                                  p.dim, "initial.value"));
    } else if (hkind == "sine") {
        auto offset = detail::broadcast(cfg.get_double_list("initial", "offset", {0.0}), p.dim,
                                        "initial.offset");
        p.h = h_sine(p.dim, detail::sine_channels(cfg, "initial", p.dim, p.dim, p.domain),
                     offset);
    } else {
        throw ConfigError("field 'initial.preset': unknown preset '" + hkind + "'", 0,
                          "initial.preset");
    }

    // force
    const std::string fkind = cfg.get_string("force", "preset", "zero");
    if (fkind == "zero") {
        p.f = f_zero(p.dim);
    } else if (fkind == "linear_drag") {
        p.f = f_linear_drag(p.dim, cfg.get_double("force", "lambda", 1.0));
    } else if (fkind == "sine") {
        p.f = f_sine(p.dim, detail::sine_channels(cfg, "force", p.dim, p.dim, p.domain),
                     cfg.get_double("force", "omega", 0.0));
    } else {
        throw ConfigError("field 'force.preset': unknown preset '" + fkind + "'", 0,
                          "force.preset");
    }

    // diffusion coefficient
    const std::string gkind = cfg.get_string("noise_g", "preset", "zero");
    if (gkind == "zero") {
        p.g = g_zero(p.dim, p.noise_dim);
    } else if (gkind == "constant") {
        p.g = g_constant(p.dim, p.noise_dim,
                         detail::broadcast(cfg.get_double_list("noise_g", "matrix", {0.0}),
                                           p.dim * p.noise_dim, "noise_g.matrix"));
    } else if (gkind == "sine") {
        p.g = g_sine(p.dim, p.noise_dim,
                     detail::sine_channels(cfg, "noise_g", p.dim * p.noise_dim, p.dim, p.domain),
                     cfg.get_double("noise_g", "omega", 0.0));
    } else {
        throw ConfigError("field 'noise_g.preset': unknown preset '" + gkind + "'", 0,
                          "noise_g.preset");
    }

    p.validate();

    const auto nodes = static_cast<std::size_t>(cfg.get_int("grid", "nodes", 64));
    const auto steps = static_cast<std::size_t>(cfg.get_int("grid", "time_steps", 256));
    sc.grid = p.make_grid(nodes);
    sc.time = TimeGrid(p.horizon, steps);
    sc.deriv_order = static_cast<int>(cfg.get_int("grid", "deriv_order", 4));

    sc.noise_seed = static_cast<std::uint64_t>(cfg.get_int("noise", "seed", 42));

    McParams& mc = sc.mc;
    mc.paths = static_cast<std::size_t>(cfg.get_int("mc", "paths", 20000));
    const std::string basis = cfg.get_string("mc", "basis", "grid");
    if (basis == "grid") mc.basis = BasisKind::grid_linear;
    else if (basis == "poly") mc.basis = BasisKind::poly;
    else throw ConfigError("field 'mc.basis': unknown basis '" + basis + "'", 0, "mc.basis");
    mc.basis_order = static_cast<int>(cfg.get_int("mc", "basis_order", 4));
    mc.tol = cfg.get_double("mc", "tol", 1e-3);
    mc.max_sweeps = static_cast<int>(cfg.get_int("mc", "max_sweeps", 12));
    mc.window_safety = cfg.get_double("mc", "window_safety", 0.8);
    mc.inner_force_iters = static_cast<int>(cfg.get_int("mc", "inner_iters", 3));
    mc.seed = static_cast<std::uint64_t>(cfg.get_int("mc", "seed", 12345));
    mc.threads = static_cast<int>(cfg.get_int("mc", "threads", 1));
    mc.markov_tol_factor = cfg.get_double("mc", "markov_tol_factor", 3.0);

    WindowPolicy& w = sc.window;
    const std::string wmode = cfg.get_string("window", "mode", "auto");
    if (wmode == "auto") w.mode = WindowPolicy::Mode::auto_constants;
    else if (wmode == "fixed") w.mode = WindowPolicy::Mode::fixed_steps;
    else throw ConfigError("field 'window.mode': unknown mode '" + wmode + "'", 0, "window.mode");
    w.fixed_steps = static_cast<std::size_t>(cfg.get_int("window", "fixed_steps", 0));
    const double m_override = cfg.get_double("window", "bound_M", 0.0);
    if (m_override > 0.0) w.bound_M = m_override;
    w.with_gradient = cfg.get_bool("window", "with_gradient", true);
    return sc;
}

}  // namespace sburgers
