#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sburgers/analysis.hpp"
#include "sburgers/fbsde.hpp"
#include "sburgers/fd_solver.hpp"
#include "sburgers/fields.hpp"
#include "sburgers/noise_field.hpp"
#include "sburgers/parallel.hpp"
#include "sburgers/problem.hpp"
#include "sburgers/transformed_force.hpp"

namespace sburgers {

/// Deterministic fixed point of the nu = 0 forward-backward system, one
/// Picard iteration per output point (tau, x): integrate the forward ODE with
/// the current Y iterate in the drift, then the backward ODE, and repeat.
/// Explicit midpoint in both directions; coefficients at half steps use the
/// average of the two bracketing slices. ybar0(tau, x) is the converged Y at
/// the start of its own trajectory; the gradient channel comes from centered
/// differences of the field.
inline LocalSolution characteristics_fixed_point(const TransformedForce& Fbar,
                                                 const TerminalCondition& terminal,
                                                 std::size_t j_begin, std::size_t j_end,
                                                 const SpatialGrid& grid, const McParams& mc) {
    if (j_end <= j_begin) throw std::invalid_argument("characteristics_fixed_point: empty window");
    const NoiseField& eta_bar = Fbar.eta();
    if (j_end > eta_bar.time_grid().steps())
        throw std::invalid_argument("characteristics_fixed_point: window exceeds the noise grid");
    const std::size_t S = j_end - j_begin;
    const std::size_t n = grid.dim();
    const double dt = eta_bar.time_grid().dt();
    const std::size_t total = grid.total_nodes();

    LocalSolution sol;
    sol.j_begin = j_begin;
    sol.j_end = j_end;
    sol.ybar = SpaceTimeField(TimeGrid(dt * static_cast<double>(S), S), grid, n);

    // terminal slice
    {
        std::vector<double> x(n);
        for (std::size_t m = 0; m < total; ++m) {
            grid.node_point(m, x);
            terminal.value(x, std::span<double>(sol.ybar.slice(S) + m * n, n));
        }
    }

    std::vector<double> sweep_dist(mc.max_sweeps, 0.0);
    int max_sweeps_used = 0;
    bool all_converged = true;

    parallel_for_blocks(total * S, mc.threads, [&](std::size_t qb, std::size_t qe) {
        std::vector<double> x0(n), xs((S + 1) * n), ys((S + 1) * n), yprev((S + 1) * n);
        std::vector<double> e0(n), e1(n), k1(n), k2(n), xm(n), ymid(n), f0(n), f1(n);
        std::vector<double> local_dist(mc.max_sweeps, 0.0);
        int local_max_sweeps = 0;
        bool local_ok = true;
        for (std::size_t q = qb; q < qe; ++q) {
            const std::size_t l0 = q / total;  // output slices 0..S-1 (slice S is terminal)
            const std::size_t m = q % total;
            grid.node_point(m, x0);

            // initial iterate: Y constant at the terminal value of x0
            terminal.value(x0, std::span<double>(ys.data() + S * n, n));
            for (std::size_t l = l0; l < S; ++l)
                for (std::size_t i = 0; i < n; ++i) ys[l * n + i] = ys[S * n + i];

            bool converged = false;
            int sweep = 0;
            for (; sweep < mc.max_sweeps; ++sweep) {
                std::copy(ys.begin() + l0 * n, ys.begin() + (S + 1) * n,
                          yprev.begin() + l0 * n);
                // forward ODE with the Y iterate in the drift
                for (std::size_t i = 0; i < n; ++i) xs[l0 * n + i] = x0[i];
                for (std::size_t l = l0; l < S; ++l) {
                    const std::size_t jg = j_begin + l;
                    Point xc(xs.data() + l * n, n);
                    eta_bar.eval_value(jg, xc, e0);
                    for (std::size_t i = 0; i < n; ++i)
                        k1[i] = -(e0[i] + yprev[l * n + i]);
                    for (std::size_t i = 0; i < n; ++i) xm[i] = xs[l * n + i] + 0.5 * dt * k1[i];
                    eta_bar.eval_value(jg, xm, e0);
                    eta_bar.eval_value(jg + 1, xm, e1);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double eh = 0.5 * (e0[i] + e1[i]);
                        const double yh = 0.5 * (yprev[l * n + i] + yprev[(l + 1) * n + i]);
                        k2[i] = -(eh + yh);
                        xs[(l + 1) * n + i] = xs[l * n + i] + dt * k2[i];
                    }
                }
                // backward ODE
                terminal.value(Point(xs.data() + S * n, n), std::span<double>(ys.data() + S * n, n));
                for (std::size_t l_plus = S; l_plus-- > l0;) {
                    const std::size_t l = l_plus;
                    const std::size_t jg = j_begin + l;
                    Point xnext(xs.data() + (l + 1) * n, n);
                    Fbar.value(jg + 1, xnext, Point(ys.data() + (l + 1) * n, n), f1);
                    for (std::size_t i = 0; i < n; ++i)
                        ymid[i] = ys[(l + 1) * n + i] + 0.5 * dt * f1[i];
                    for (std::size_t i = 0; i < n; ++i)
                        xm[i] = 0.5 * (xs[l * n + i] + xs[(l + 1) * n + i]);
                    Fbar.value(jg, xm, ymid, f0);
                    Fbar.value(jg + 1, xm, ymid, f1);
                    for (std::size_t i = 0; i < n; ++i)
                        ys[l * n + i] = ys[(l + 1) * n + i] + 0.5 * dt * (f0[i] + f1[i]);
                }
                double d = 0.0;
                for (std::size_t l = l0; l <= S; ++l)
                    for (std::size_t i = 0; i < n; ++i)
                        d = std::max(d, std::fabs(ys[l * n + i] - yprev[l * n + i]));
                local_dist[sweep] = std::max(local_dist[sweep], d);
                if (d < mc.tol) {
                    converged = true;
                    ++sweep;
                    break;
                }
            }
            local_max_sweeps = std::max(local_max_sweeps, sweep);
            if (!converged) local_ok = false;
            for (std::size_t i = 0; i < n; ++i)
                sol.ybar.at(l0, m, i) = ys[l0 * n + i];
        }
        // merge (ranges own disjoint (l0, m) pairs; the reductions are maxima)
        static std::mutex merge_mutex;
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (int s = 0; s < mc.max_sweeps; ++s)
            sweep_dist[s] = std::max(sweep_dist[s], local_dist[s]);
        max_sweeps_used = std::max(max_sweeps_used, local_max_sweeps);
        all_converged = all_converged && local_ok;
    });

    for (int s = 0; s < max_sweeps_used; ++s) sol.log.distances.push_back(sweep_dist[s]);
    sol.log.finish(mc.tol);
    sol.log.converged = all_converged && !sol.log.distances.empty();
    sol.sup_norm = sol.ybar.sup_norm();

    // gradient channel by centered differences
    sol.ybar.alloc_gradient();
    double lip = 0.0;
    for (std::size_t l = 0; l <= S; ++l)
        for (std::size_t m = 0; m < total; ++m)
            for (std::size_t a = 0; a < n; ++a) {
                const std::size_t mp = grid.neighbor(m, a, +1);
                const std::size_t mm = grid.neighbor(m, a, -1);
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = (sol.ybar.at(l, mp, i) - sol.ybar.at(l, mm, i)) /
                                     (2.0 * grid.spacing(a));
                    sol.ybar.grad_at(l, m, i, a) = g;
                    lip = std::max(lip, std::fabs(g));
                }
            }
    sol.lipschitz_x = lip;
    return sol;
}

/// First time the forward characteristics map xi -> X(t; xi) of the physical
/// field stops being injective at grid resolution: integrate dX/dt = y(t, X)
/// from every node and watch the discrete Jacobian determinant fall below
/// `jac_floor`. Returns the field horizon when no degeneracy is seen.
inline double shock_guard_time(const SpaceTimeField& y_forward, double jac_floor = 0.05) {
    const SpatialGrid& grid = y_forward.space;
    const std::size_t n = grid.dim();
    const std::size_t total = grid.total_nodes();
    const TimeGrid& tg = y_forward.time;
    const double dt = tg.dt();

    std::vector<double> X(total * n), k1(n), k2(n), xm(n);
    std::vector<double> x(n);
    for (std::size_t m = 0; m < total; ++m) {
        grid.node_point(m, x);
        for (std::size_t i = 0; i < n; ++i) X[m * n + i] = x[i];
    }
    std::vector<double> jac(n * n);
    for (std::size_t j = 0; j < tg.steps(); ++j) {
        // min discrete Jacobian determinant at this time
        for (std::size_t m = 0; m < total; ++m) {
            for (std::size_t a = 0; a < n; ++a) {
                const std::size_t mp = grid.neighbor(m, a, +1);
                const std::size_t mm = grid.neighbor(m, a, -1);
                for (std::size_t i = 0; i < n; ++i) {
                    double diff = X[mp * n + i] - X[mm * n + i];
                    if (grid.periodic()) {
                        const double per = grid.period(i);
                        diff -= per * std::round((diff - (i == a ? 2.0 * grid.spacing(a) : 0.0)) / per);
                    }
                    jac[i * n + a] = diff / (2.0 * grid.spacing(a));
                }
            }
            double det = 1.0;
            if (n == 1) {
                det = jac[0];
            } else if (n == 2) {
                det = jac[0] * jac[3] - jac[1] * jac[2];
            } else {
                // n <= 3 in practice; generic cofactor for 3x3
                det = jac[0] * (jac[4] * jac[8] - jac[5] * jac[7]) -
                      jac[1] * (jac[3] * jac[8] - jac[5] * jac[6]) +
                      jac[2] * (jac[3] * jac[7] - jac[4] * jac[6]);
            }
            if (det <= jac_floor) return tg.time(j);
        }
        // advance characteristics by explicit midpoint
        for (std::size_t m = 0; m < total; ++m) {
            Point xc(X.data() + m * n, n);
            y_forward.eval(j, xc, k1);
            for (std::size_t i = 0; i < n; ++i) xm[i] = X[m * n + i] + 0.5 * dt * k1[i];
            std::vector<double> v0(n), v1(n);
            y_forward.eval(j, xm, v0);
            y_forward.eval(j + 1, xm, v1);
            for (std::size_t i = 0; i < n; ++i)
                X[m * n + i] += dt * 0.5 * (v0[i] + v1[i]);
        }
    }
    return tg.horizon();
}

// ---------------------------------------------------------------------------
// Vanishing-viscosity sweep.
// ---------------------------------------------------------------------------

struct SweepRow {
    double nu = 0.0;
    double sup_err = 0.0;
    double mean_err = 0.0;
    bool converged = true;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double exponent = 0.0;
    double r_squared = 0.0;
    bool exponent_degenerate = false;
    bool monotone_ok = true;
    bool partial = false;
    double window_horizon = 0.0;
    double shock_time = 0.0;
};

/// For each viscosity, solve the window via the stochastic machinery and
/// measure the sup/mean distance to the nu = 0 characteristics solution on
/// the shared grid; fit the log-log rate over the three smallest values.
/// The window must stay clear of the characteristics' shock guard.
inline SweepReport viscosity_sweep(const BurgersProblem& base, std::span<const double> nus,
                                   const NoiseField& eta, const SpatialGrid& grid,
                                   std::size_t window_steps, const McParams& mc,
                                   const WindowPolicy& policy = {}) {
    if (nus.size() < 3) throw std::invalid_argument("viscosity_sweep: need at least 3 viscosities");
    double nu_min = nus[0], nu_max = nus[0];
    for (double v : nus) {
        if (!(v > 0.0)) throw std::invalid_argument("viscosity_sweep: viscosities must be positive");
        nu_min = std::min(nu_min, v);
        nu_max = std::max(nu_max, v);
    }
    if (nu_max / nu_min < 8.0)
        throw std::invalid_argument(
            "viscosity_sweep: viscosities must span about a decade (factor >= 8)");
    if (window_steps < 1 || window_steps > eta.time_grid().steps())
        throw std::invalid_argument("viscosity_sweep: window out of range");

    // restrict everything to the physical window [0, window_steps * dt]
    auto eta_w = restrict_noise(eta, window_steps);
    BurgersProblem pw = base;
    pw.horizon = eta_w.time_grid().horizon();

    SweepReport rep;
    rep.window_horizon = pw.horizon;

    // nu = 0 reference by characteristics on the reversed window
    auto eta_bar = std::make_shared<const NoiseField>(time_reverse(eta_w));
    BurgersProblem p0 = pw;
    p0.viscosity = 0.0;
    TransformedForce F0(p0.f, 0.0, eta_bar, true);
    double M = policy.bound_M.value_or(0.0);
    if (!(M > 0.0)) {
        // same Gronwall-style default as the continuation driver
        double sup_h = 0.0;
        std::vector<double> x(grid.dim()), hv(grid.dim());
        for (std::size_t m = 0; m < grid.total_nodes(); ++m) {
            grid.node_point(m, x);
            p0.h.value(x, hv);
            for (double v : hv) sup_h = std::max(sup_h, std::fabs(v));
        }
        M = std::max(2.0 * sup_h + pw.horizon * p0.f.growth_L * (1.0 + sup_h), 1.0);
    }
    auto F0M = cutoff_force(F0, M);
    auto inviscid = characteristics_fixed_point(F0M, terminal_from_initial(p0.h), 0,
                                                window_steps, grid, mc);
    if (!inviscid.log.converged) {
        // past the crossing time the fixed point has no solution; estimate
        // the classical steepening time from the initial slope and refuse
        double steepest = 0.0;
        std::vector<double> x(grid.dim()), hg(grid.dim() * grid.dim());
        for (std::size_t m = 0; m < grid.total_nodes(); ++m) {
            grid.node_point(m, x);
            p0.h.gradient(x, hg);
            for (std::size_t a = 0; a < grid.dim(); ++a)
                steepest = std::max(steepest, -hg[a * grid.dim() + a]);
        }
        std::ostringstream os;
        os << "viscosity_sweep: inviscid fixed point did not converge on the window; "
           << "characteristics cross near t=" << (steepest > 0.0 ? 1.0 / steepest : pw.horizon)
           << ", shrink the window";
        throw std::invalid_argument(os.str());
    }

    // shock guard on the physical inviscid field y0 = ybar0(T-t) + eta
    SpaceTimeField y0_forward = time_reverse(inviscid.ybar);
    {
        const std::size_t per = grid.total_nodes() * grid.dim();
        for (std::size_t j = 0; j <= window_steps; ++j) {
            const double* e = eta_w.slice(0, j);
            double* v = y0_forward.slice(j);
            for (std::size_t q = 0; q < per; ++q) v[q] += e[q];
        }
    }
    rep.shock_time = shock_guard_time(y0_forward);
    if (rep.shock_time < pw.horizon) {
        std::ostringstream os;
        os << "viscosity_sweep: window horizon " << pw.horizon
           << " extends beyond the characteristics shock guard at t=" << rep.shock_time;
        throw std::invalid_argument(os.str());
    }

    SpaceTimeField yhat0 = time_reverse(inviscid.ybar);
    for (double nu : nus) {
        SweepRow row;
        row.nu = nu;
        BurgersProblem pv = pw;
        pv.viscosity = nu;
        WindowPolicy pol = policy;
        pol.bound_M = M;
        pol.with_gradient = false;
        auto glob = global_continuation(pv, eta_w, grid, mc, pol);
        row.converged = glob.completed;
        if (glob.completed) {
            row.sup_err = sup_distance(glob.yhat, yhat0);
            row.mean_err = mean_distance(glob.yhat, yhat0);
        } else {
            rep.partial = true;
        }
        rep.rows.push_back(row);
    }

    // monotone non-increasing errors as nu decreases, up to 1.1x wiggle
    std::vector<std::size_t> order(rep.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rep.rows[a].nu > rep.rows[b].nu;
    });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto& hi = rep.rows[order[i]];
        const auto& lo = rep.rows[order[i + 1]];
        if (hi.converged && lo.converged && lo.sup_err > 1.1 * hi.sup_err) rep.monotone_ok = false;
    }

    // rate fit over the three smallest viscosities; rounding-level errors
    // (constant data) make the fit degenerate
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = order.size(); i-- > 0 && pts.size() < 3;) {
        const auto& r = rep.rows[order[i]];
        if (r.converged && r.sup_err > 1e-12) pts.emplace_back(r.nu, r.sup_err);
    }
    if (pts.size() == 3) {
        auto fit = rate_fit(pts);
        rep.exponent = fit.exponent;
        rep.r_squared = fit.r_squared;
    } else {
        rep.exponent_degenerate = true;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Local existence window of the truncated problem.
// ---------------------------------------------------------------------------

struct ExistenceWindow {
    double S = 0.0;     // min(beta, T_N)
    double T_N = 0.0;   // noise stopping time
    double beta = 0.0;  // contraction window of the truncated constants
    double K_N = 0.0, C_N = 0.0;
    double M_N = 0.0;  // cutoff level used for the truncated force
};

/// S = beta_{K_N, C_N} /\ T_N for the noise truncated at level N.
inline ExistenceWindow local_existence_window(const BurgersProblem& problem,
                                              const NoiseField& eta, double N,
                                              const SpatialGrid& grid, double safety = 0.8) {
    if (!(N > 0.0)) throw std::invalid_argument("local_existence_window: N must be positive");
    ExistenceWindow out;
    out.T_N = stopping_time_T_N(eta, N);
    auto eta_n = std::make_shared<const NoiseField>(
        time_reverse(truncate_noise(eta, out.T_N)));

    double sup_h = 0.0;
    std::vector<double> x(grid.dim()), hv(grid.dim());
    for (std::size_t m = 0; m < grid.total_nodes(); ++m) {
        grid.node_point(m, x);
        problem.h.value(x, hv);
        for (double v : hv) sup_h = std::max(sup_h, std::fabs(v));
    }
    out.M_N = std::max(2.0 * sup_h + problem.horizon * (problem.f.growth_L * (1.0 + sup_h) +
                                                        problem.viscosity * N + (N + sup_h) * N),
                       1.0);
    TransformedForce Fn(problem.f, problem.viscosity, eta_n, true, out.M_N);
    const auto kc = estimate_constants(Fn, terminal_from_initial(problem.h), grid, out.M_N + 1.0);
    out.K_N = kc.K;
    out.C_N = kc.C;
    out.beta = estimate_window_length(kc.K, kc.C, safety, problem.horizon);
    out.S = std::min(out.beta, out.T_N);
    return out;
}

}  // namespace sburgers
