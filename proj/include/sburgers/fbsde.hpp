#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sburgers/brownian.hpp"
#include "sburgers/fields.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/noise_field.hpp"
#include "sburgers/parallel.hpp"
#include "sburgers/problem.hpp"
#include "sburgers/regression.hpp"
#include "sburgers/rng.hpp"
#include "sburgers/transformed_force.hpp"

namespace sburgers {

enum class OutOfDomain { extend, fail };

struct McParams {
    std::size_t paths = 20000;
    BasisKind basis = BasisKind::grid_linear;
    int basis_order = 4;  // poly basis only
    double tol = 1e-3;
    int max_sweeps = 12;
    double window_safety = 0.8;
    int inner_force_iters = 3;  // fixed-point resolutions of the implicit force step
    std::uint64_t seed = 12345;
    OutOfDomain out_of_domain = OutOfDomain::extend;
    int threads = 1;
    double markov_tol_factor = 3.0;
};

struct IterationLog {
    std::vector<double> distances;  // sup-grid distance per Picard sweep
    bool converged = false;
    int sweeps = 0;
    // max of d_{k+1}/d_k past the first sweep; 0 when fewer than 3 sweeps
    double contraction_ratio = 0.0;

    void finish(double tol) {
        sweeps = static_cast<int>(distances.size());
        converged = !distances.empty() && distances.back() < tol;
        contraction_ratio = 0.0;
        for (std::size_t k = 1; k + 1 < distances.size(); ++k)
            if (distances[k] > 0.0)
                contraction_ratio = std::max(contraction_ratio, distances[k + 1] / distances[k]);
    }
};

/// Monte Carlo ensemble over one solve window [j_begin, j_end] of the
/// reversed-clock grid. Path arrays use local slice indices 0..steps.
struct FbsdeBatch {
    std::size_t j_begin = 0, j_end = 0;
    std::size_t paths = 0;
    std::size_t dim = 1;
    double dt = 0.0;
    std::vector<double> X;   // [(p*(S+1) + l)*n + i]
    std::vector<double> Y;   // same layout
    std::vector<double> Z;   // [(p*(S+1) + l)*n*n + i*n + k]
    std::vector<double> dW;  // [(p*S + l)*n + k]
    std::vector<double> dX;  // [((k*P + p)*(S+1) + l)*n + i], per direction k
    std::vector<double> dY;  // same layout as dX
    std::uint64_t seed = 0;

    std::size_t steps() const { return j_end - j_begin; }

    double* x_at(std::size_t p, std::size_t l) {
        return X.data() + (p * (steps() + 1) + l) * dim;
    }
    const double* x_at(std::size_t p, std::size_t l) const {
        return X.data() + (p * (steps() + 1) + l) * dim;
    }
    double* y_at(std::size_t p, std::size_t l) {
        return Y.data() + (p * (steps() + 1) + l) * dim;
    }
    const double* y_at(std::size_t p, std::size_t l) const {
        return Y.data() + (p * (steps() + 1) + l) * dim;
    }
    double* z_at(std::size_t p, std::size_t l) {
        return Z.data() + (p * (steps() + 1) + l) * dim * dim;
    }
    const double* z_at(std::size_t p, std::size_t l) const {
        return Z.data() + (p * (steps() + 1) + l) * dim * dim;
    }
    const double* dw_at(std::size_t p, std::size_t l) const {
        return dW.data() + (p * steps() + l) * dim;
    }
    double* dx_at(std::size_t k, std::size_t p, std::size_t l) {
        return dX.data() + ((k * paths + p) * (steps() + 1) + l) * dim;
    }
    const double* dx_at(std::size_t k, std::size_t p, std::size_t l) const {
        return dX.data() + ((k * paths + p) * (steps() + 1) + l) * dim;
    }
    double* dy_at(std::size_t k, std::size_t p, std::size_t l) {
        return dY.data() + ((k * paths + p) * (steps() + 1) + l) * dim;
    }
    const double* dy_at(std::size_t k, std::size_t p, std::size_t l) const {
        return dY.data() + ((k * paths + p) * (steps() + 1) + l) * dim;
    }
};

/// Terminal data of a backward window: an evaluator plus (for the derivative
/// processes) its spatial gradient [i*n + k] = d_k v_i.
struct TerminalCondition {
    std::function<void(Point, std::span<double>)> value;
    std::function<void(Point, std::span<double>)> gradient;  // may be empty
};

inline TerminalCondition terminal_from_initial(const InitialCondition& h) {
    return {h.value, h.gradient};
}

/// Terminal data from a nodal slice: multilinear interpolation for the value,
/// centered finite differences of the nodal data for the gradient.
inline TerminalCondition terminal_from_nodal(const SpatialGrid& grid,
                                             std::vector<double> nodal, std::size_t comp) {
    struct Shared {
        SpatialGrid grid;
        std::size_t comp;
        std::vector<double> values;
        std::vector<double> grad;  // [ (m*comp + i)*dim + k ]
    };
    auto sh = std::make_shared<Shared>();
    sh->grid = grid;
    sh->comp = comp;
    sh->values = std::move(nodal);
    const std::size_t n = grid.dim();
    const std::size_t total = grid.total_nodes();
    sh->grad.assign(total * comp * n, 0.0);
    for (std::size_t m = 0; m < total; ++m)
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t mp = grid.neighbor(m, a, +1);
            const std::size_t mm = grid.neighbor(m, a, -1);
            const double denom = grid.periodic() ? 2.0 * grid.spacing(a)
                                                 : (mp == mm ? 1.0
                                                    : (mp == m || mm == m)
                                                        ? grid.spacing(a)
                                                        : 2.0 * grid.spacing(a));
            for (std::size_t i = 0; i < comp; ++i)
                sh->grad[(m * comp + i) * n + a] =
                    (sh->values[mp * comp + i] - sh->values[mm * comp + i]) / denom;
        }
    TerminalCondition tc;
    tc.value = [sh](Point x, std::span<double> out) {
        sh->grid.interpolate(sh->values.data(), sh->comp, x, out);
    };
    tc.gradient = [sh, n](Point x, std::span<double> out) {
        sh->grid.interpolate(sh->grad.data(), sh->comp * n, x, out);
    };
    return tc;
}

// ---------------------------------------------------------------------------
// Window-length heuristic and the grid estimates of the contraction constants.
// ---------------------------------------------------------------------------

/// gamma = safety / (1 + K + K^2 + C), capped at min(1, horizon). Monotone
/// non-increasing in K and C.
inline double estimate_window_length(double K, double C, double safety, double horizon = 1.0) {
    if (K < 0.0 || C < 0.0) throw std::invalid_argument("estimate_window_length: K, C must be >= 0");
    if (!(safety > 0.0) || safety > 1.0)
        throw std::invalid_argument("estimate_window_length: safety must lie in (0, 1]");
    const double gamma = safety / (1.0 + K + K * K + C);
    return std::min({gamma, 1.0, horizon});
}

struct ConstantsKC {
    double K = 0.0;
    double C = 0.0;
    double C1 = 0.0;
};

/// Grid maxima standing in for the sup-norm constants: first derivatives of
/// the terminal data, the noise channels, and the (cutoff) force; second
/// derivatives for C. F-derivatives in x are probed node-to-node so the
/// piecewise-linear channel interpolation never enters; y-probes cover the
/// ball the cutoff keeps relevant.
inline ConstantsKC estimate_constants(const TransformedForce& Fbar,
                                      const TerminalCondition& terminal,
                                      const SpatialGrid& grid, double probe_radius) {
    const std::size_t n = grid.dim();
    const NoiseField& eta = Fbar.eta();
    const std::size_t total = grid.total_nodes();
    const std::size_t steps = eta.time_grid().steps();

    ConstantsKC out;
    double sup_h = 0.0, sup_dh = 0.0, sup_d2h = 0.0;
    std::vector<double> x(n), hv(n), hg(n * n);
    for (std::size_t m = 0; m < total; ++m) {
        grid.node_point(m, x);
        terminal.value(x, hv);
        for (double v : hv) sup_h = std::max(sup_h, std::fabs(v));
        if (terminal.gradient) {
            terminal.gradient(x, hg);
            for (double v : hg) sup_dh = std::max(sup_dh, std::fabs(v));
        }
    }
    // second derivative of the terminal by node-step differences of its gradient
    if (terminal.gradient) {
        std::vector<double> gp(n * n), gm(n * n), xp(n), xm(n);
        for (std::size_t m = 0; m < total; m += std::max<std::size_t>(1, total / 64)) {
            grid.node_point(m, x);
            for (std::size_t a = 0; a < n; ++a) {
                const double h = grid.spacing(a);
                xp = x;
                xm = x;
                xp[a] += h;
                xm[a] -= h;
                terminal.gradient(xp, gp);
                terminal.gradient(xm, gm);
                for (std::size_t q = 0; q < n * n; ++q)
                    sup_d2h = std::max(sup_d2h, std::fabs(gp[q] - gm[q]) / (2.0 * h));
            }
        }
    }

    double sup_eta = 0.0, sup_deta = 0.0, sup_d2eta = 0.0;
    const auto& mis = eta.multi_indices();
    for (std::size_t a = 0; a < eta.channel_count(); ++a) {
        const int ord = mis.order_of(a);
        if (ord > 2) continue;
        double m = 0.0;
        for (double v : eta.channel(a)) m = std::max(m, std::fabs(v));
        if (ord == 0) sup_eta = std::max(sup_eta, m);
        if (ord == 1) sup_deta = std::max(sup_deta, m);
        if (ord == 2) sup_d2eta = std::max(sup_d2eta, m);
    }

    // force probes over a time/node/y subsample
    double sup_F = 0.0, sup_dF = 0.0, sup_d2F = 0.0;
    std::vector<double> y(n, 0.0), fv(n), d1v(n * n), d2v(n * n), tmp(n * n), tmp2(n * n);
    std::vector<double> yprobe;
    std::vector<std::vector<double>> yprobes;
    yprobes.emplace_back(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (double r : {0.5 * probe_radius, probe_radius}) {
            std::vector<double> yp(n, 0.0);
            yp[i] = r;
            yprobes.push_back(yp);
            yp[i] = -r;
            yprobes.push_back(yp);
        }
    const std::size_t tstride = std::max<std::size_t>(1, steps / 8);
    const std::size_t mstride = std::max<std::size_t>(1, total / 64);
    const double ydelta = 1e-4 * (1.0 + probe_radius);
    for (std::size_t j = 0; j <= steps; j += tstride) {
        for (std::size_t m = 0; m < total; m += mstride) {
            grid.node_point(m, x);
            for (const auto& yp : yprobes) {
                Fbar.value(j, x, yp, fv);
                for (double v : fv) sup_F = std::max(sup_F, std::fabs(v));
                Fbar.d1(j, x, yp, d1v);
                Fbar.d2(j, x, yp, d2v);
                double a1 = 0.0, a2 = 0.0;
                for (double v : d1v) a1 = std::max(a1, std::fabs(v));
                for (double v : d2v) a2 = std::max(a2, std::fabs(v));
                sup_dF = std::max(sup_dF, a1 + a2);

                // d2F: node-step x-differences of d1; small y-differences of d1, d2
                for (std::size_t a = 0; a < n; ++a) {
                    const double h = grid.spacing(a);
                    std::vector<double> xp = x, xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    Fbar.d1(j, xp, yp, tmp);
                    Fbar.d1(j, xm, yp, tmp2);
                    for (std::size_t q = 0; q < n * n; ++q)
                        sup_d2F = std::max(sup_d2F, std::fabs(tmp[q] - tmp2[q]) / (2.0 * h));
                    std::vector<double> ypp = yp, ypm = yp;
                    ypp[a] += ydelta;
                    ypm[a] -= ydelta;
                    Fbar.d2(j, x, ypp, tmp);
                    Fbar.d2(j, x, ypm, tmp2);
                    for (std::size_t q = 0; q < n * n; ++q)
                        sup_d2F = std::max(sup_d2F, std::fabs(tmp[q] - tmp2[q]) / (2.0 * ydelta));
                    Fbar.d1(j, x, ypp, tmp);
                    Fbar.d1(j, x, ypm, tmp2);
                    for (std::size_t q = 0; q < n * n; ++q)
                        sup_d2F = std::max(sup_d2F, std::fabs(tmp[q] - tmp2[q]) / (2.0 * ydelta));
                }
            }
        }
    }
    out.K = sup_dh + sup_deta + sup_dF;
    out.C = sup_d2h + sup_d2eta + sup_d2F;
    out.C1 = sup_h + sup_eta + sup_F;
    return out;
}

// ---------------------------------------------------------------------------
// Forward simulation.
// ---------------------------------------------------------------------------

/// One Euler step chain of the forward SDE on the window:
///   X_{l+1} = X_l - (eta_bar(t_l, X_l) + Yhat(t_l, X_l)) dt + sqrt(2 nu) dW_l,
/// with the feedback field read by multilinear interpolation (constant
/// extension outside a box grid, or an error, per mc.out_of_domain).
inline void euler_forward(Point x0, std::size_t j_begin, std::size_t steps,
                          const SpaceTimeField& feedback, const NoiseField& eta_bar, double nu,
                          std::span<const double> dw, std::span<double> x_path,
                          const McParams& mc = {}) {
    const std::size_t n = feedback.comp;
    const double dt = eta_bar.time_grid().dt();
    const double noise_scale = nu > 0.0 ? std::sqrt(2.0 * nu) : 0.0;
    thread_local std::vector<double> ev, yv;
    ev.resize(n);
    yv.resize(n);
    for (std::size_t i = 0; i < n; ++i) x_path[i] = x0[i];
    const SpatialGrid& sg = feedback.space;
    for (std::size_t l = 0; l < steps; ++l) {
        const double* xc = x_path.data() + l * n;
        double* xn = x_path.data() + (l + 1) * n;
        Point xcs(xc, n);
        if (mc.out_of_domain == OutOfDomain::fail && !sg.periodic()) {
            for (std::size_t a = 0; a < n; ++a)
                if (xc[a] < sg.axis(a).lo || xc[a] > sg.axis(a).hi)
                    throw std::runtime_error("euler_forward: path left the interpolation domain");
        }
        eta_bar.eval_value(j_begin + l, xcs, ev);
        feedback.eval(l, xcs, yv);
        for (std::size_t i = 0; i < n; ++i) {
            double v = xc[i] - (ev[i] + yv[i]) * dt;
            if (noise_scale > 0.0) v += noise_scale * dw[l * n + i];
            xn[i] = v;
        }
    }
}

/// Spec-facing overload taking a Brownian driver defined on the window.
inline std::vector<double> euler_forward(Point x0, std::size_t j_begin,
                                         const SpaceTimeField& feedback,
                                         const NoiseField& eta_bar, double nu,
                                         const BrownianPath& w, const McParams& mc = {}) {
    if (w.dim() != feedback.comp)
        throw std::invalid_argument("euler_forward: driver dimension mismatch");
    const std::size_t steps = w.grid().steps();
    std::vector<double> path((steps + 1) * feedback.comp);
    euler_forward(x0, j_begin, steps, feedback, eta_bar, nu, w.increments(), path, mc);
    return path;
}

namespace detail {

inline void stratified_starts(const SpatialGrid& grid, std::size_t paths,
                              std::vector<double>& starts, std::size_t& actual_paths) {
    const std::size_t total = grid.total_nodes();
    std::size_t per = std::max<std::size_t>(2, (paths + total - 1) / total);
    per += per % 2;  // antithetic pairs share a start node
    actual_paths = per * total;
    const std::size_t n = grid.dim();
    starts.assign(actual_paths * n, 0.0);
    std::vector<double> x(n);
    for (std::size_t m = 0; m < total; ++m) {
        grid.node_point(m, x);
        for (std::size_t r = 0; r < per; ++r)
            for (std::size_t i = 0; i < n; ++i) starts[(m * per + r) * n + i] = x[i];
    }
}

/// Antithetic driver increments: pair (2q, 2q+1) uses one stream and its
/// negation. Pairs share a start node (see stratified_starts), which halves
/// the variance of the fitted conditional expectations at no cost.
inline void fill_drivers(FbsdeBatch& batch, const McParams& mc) {
    const std::size_t S = batch.steps();
    const std::size_t n = batch.dim;
    const double s = std::sqrt(batch.dt);
    batch.dW.assign(batch.paths * S * n, 0.0);
    const std::size_t pairs = batch.paths / 2;
    parallel_for_blocks(pairs, mc.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            NormalRng rng(derive_seed(mc.seed, q));
            double* even = batch.dW.data() + (2 * q) * S * n;
            double* odd = batch.dW.data() + (2 * q + 1) * S * n;
            for (std::size_t i = 0; i < S * n; ++i) {
                even[i] = s * rng();
                odd[i] = -even[i];
            }
        }
    });
    if (batch.paths % 2 == 1) {
        NormalRng rng(derive_seed(mc.seed, pairs));
        double* last = batch.dW.data() + (batch.paths - 1) * S * n;
        for (std::size_t i = 0; i < S * n; ++i) last[i] = s * rng();
    }
}

/// Piecewise-linear interpolation through scattered 1D samples onto the grid
/// nodes. Points are (position, value_0..value_{comp-1}); duplicates collapse
/// to their first occurrence. Periodic grids wrap the end segment; box grids
/// extend constantly.
inline void scatter_interp_1d(const SpatialGrid& grid, std::vector<double>& pos,
                              std::vector<double>& vals, std::size_t comp,
                              double* out_nodes) {
    const std::size_t k = pos.size();
    const double lo = grid.axis(0).lo;
    const double period = grid.period(0);
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    if (grid.periodic())
        for (double& v : pos) v = lo + std::fmod(std::fmod(v - lo, period) + period, period);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pos[a] < pos[b];
    });
    std::vector<double> ps;
    std::vector<double> vs;
    ps.reserve(k);
    vs.reserve(k * comp);
    for (std::size_t idx : order) {
        if (!ps.empty() && pos[idx] - ps.back() < 1e-13) continue;
        ps.push_back(pos[idx]);
        for (std::size_t c = 0; c < comp; ++c) vs.push_back(vals[idx * comp + c]);
    }
    const std::size_t kk = ps.size();
    if (kk == 0) return;
    for (std::size_t m = 0; m < grid.nodes(0); ++m) {
        const double t = grid.coord(0, m);
        double* out = out_nodes + m * comp;
        if (kk == 1) {
            for (std::size_t c = 0; c < comp; ++c) out[c] = vs[c];
            continue;
        }
        auto it = std::lower_bound(ps.begin(), ps.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - ps.begin());
        double x0, x1;
        std::size_t i0, i1;
        if (hi == 0 || hi == kk) {
            if (grid.periodic()) {
                i0 = kk - 1;
                i1 = 0;
                x0 = ps[kk - 1] - (hi == 0 ? period : 0.0);
                x1 = ps[0] + (hi == kk ? period : 0.0);
            } else {
                const std::size_t edge = (hi == 0) ? 0 : kk - 1;
                for (std::size_t c = 0; c < comp; ++c) out[c] = vs[edge * comp + c];
                continue;
            }
        } else {
            i0 = hi - 1;
            i1 = hi;
            x0 = ps[i0];
            x1 = ps[i1];
        }
        const double w = (x1 > x0) ? (t - x0) / (x1 - x0) : 0.0;
        for (std::size_t c = 0; c < comp; ++c)
            out[c] = (1.0 - w) * vs[i0 * comp + c] + w * vs[i1 * comp + c];
    }
}

/// Copy every other antithetic pair (by pair parity) into a sub-batch; used
/// by the half-sample noise estimates. Selecting whole pairs keeps the
/// halves independent and antithetic within themselves.
inline FbsdeBatch half_batch(const FbsdeBatch& src, int parity) {
    FbsdeBatch out;
    out.j_begin = src.j_begin;
    out.j_end = src.j_end;
    out.dim = src.dim;
    out.dt = src.dt;
    out.seed = src.seed;
    const std::size_t S = src.steps();
    const std::size_t n = src.dim;
    out.X.assign(src.paths * (S + 1) * n, 0.0);
    out.Y.assign(src.paths * (S + 1) * n, 0.0);
    out.Z.assign(src.paths * (S + 1) * n * n, 0.0);
    out.dW.assign(src.paths * S * n, 0.0);
    std::size_t q = 0;
    for (std::size_t p = 0; p < src.paths; ++p) {
        if (static_cast<int>((p / 2) % 2) != parity) continue;
        std::copy(src.x_at(p, 0), src.x_at(p, 0) + (S + 1) * n, out.X.begin() + q * (S + 1) * n);
        std::copy(src.y_at(p, 0), src.y_at(p, 0) + (S + 1) * n, out.Y.begin() + q * (S + 1) * n);
        std::copy(src.dw_at(p, 0), src.dw_at(p, 0) + S * n, out.dW.begin() + q * S * n);
        ++q;
    }
    out.paths = q;
    out.X.resize(q * (S + 1) * n);
    out.Y.resize(q * (S + 1) * n);
    out.Z.resize(q * (S + 1) * n * n);
    out.dW.resize(q * S * n);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Backward regression pass.
// ---------------------------------------------------------------------------

struct BackwardPassResult {
    SpaceTimeField yfield;  // fitted nodal values, one slice per window slice
    BasisWarnings warnings;
};

/// Least-squares Monte Carlo backward recursion on a simulated batch:
///   Y_S = h(X_S) exactly,
///   Y_l = E[Y_{l+1} | X_l] + F_bar(t_l, X_l, Y_l) dt   (implicit step resolved
///         by a fixed number of inner fixed-point evaluations),
///   Z_l = E[(Y_{l+1} - E[Y_{l+1}|X_l]) dW_l^T | X_l] / dt.
/// The centered form of Z vanishes identically on constant data. With nu = 0
/// the recursion is per-path and Z stays exactly zero.
inline BackwardPassResult regress_backward(FbsdeBatch& batch, const TerminalCondition& terminal,
                                           const TransformedForce& Fbar, double nu,
                                           const SpatialGrid& grid, const McParams& mc,
                                           const SpaceTimeField* prev_feedback = nullptr) {
    const std::size_t S = batch.steps();
    const std::size_t P = batch.paths;
    const std::size_t n = batch.dim;
    const double dt = batch.dt;
    const std::size_t total = grid.total_nodes();

    BackwardPassResult res;
    res.yfield = SpaceTimeField(TimeGrid(dt * static_cast<double>(S), S), grid, n);

    std::vector<double> x(n);
    // terminal slice: exact terminal values on paths and nodes
    for (std::size_t p = 0; p < P; ++p)
        terminal.value(Point(batch.x_at(p, S), n), std::span<double>(batch.y_at(p, S), n));
    for (std::size_t m = 0; m < total; ++m) {
        grid.node_point(m, x);
        terminal.value(x, std::span<double>(res.yfield.slice(S) + m * n, n));
    }

    RegressionBasis basis(mc.basis, grid, mc.basis_order);
    LeastSquaresFit fit(basis, n);
    LeastSquaresFit fitz(basis, n * n);
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(P);
    std::vector<double> cond(P * n), ztarget(n * n), ywork(n), fv(n);

    for (std::size_t l_plus = S; l_plus-- > 0;) {
        const std::size_t l = l_plus;
        const std::size_t jg = batch.j_begin + l;
        if (nu > 0.0) {
            fit.reset();
            for (std::size_t p = 0; p < P; ++p) {
                basis.eval(Point(batch.x_at(p, l), n), rows[p]);
                fit.add_row(rows[p], std::span<const double>(batch.y_at(p, l + 1), n));
            }
            fit.solve(res.warnings);
            for (std::size_t p = 0; p < P; ++p)
                fit.evaluate_row(rows[p], std::span<double>(cond.data() + p * n, n));

            // martingale-increment regression for Z
            fitz.reset();
            for (std::size_t p = 0; p < P; ++p) {
                const double* ynext = batch.y_at(p, l + 1);
                const double* dw = batch.dw_at(p, l);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < n; ++k)
                        ztarget[i * n + k] = (ynext[i] - cond[p * n + i]) * dw[k] / dt;
                fitz.add_row(rows[p], ztarget);
            }
            fitz.solve(res.warnings);
            for (std::size_t p = 0; p < P; ++p)
                fitz.evaluate_row(rows[p], std::span<double>(batch.z_at(p, l), n * n));
        } else {
            for (std::size_t p = 0; p < P; ++p)
                for (std::size_t i = 0; i < n; ++i) cond[p * n + i] = batch.y_at(p, l + 1)[i];
        }

        // implicit force step on paths
        for (std::size_t p = 0; p < P; ++p) {
            double* y = batch.y_at(p, l);
            const double* c = cond.data() + p * n;
            Point xp(batch.x_at(p, l), n);
            for (std::size_t i = 0; i < n; ++i) y[i] = c[i];
            for (int it = 0; it < mc.inner_force_iters; ++it) {
                Fbar.value(jg, xp, Point(y, n), fv);
                for (std::size_t i = 0; i < n; ++i) y[i] = c[i] + dt * fv[i];
            }
        }

        // nodal field slice: same update evaluated at the grid nodes
        double* slice = res.yfield.slice(l);
        if (nu > 0.0) {
            for (std::size_t m = 0; m < total; ++m) {
                grid.node_point(m, x);
                double* y = slice + m * n;
                fit.evaluate(x, ywork);
                for (std::size_t i = 0; i < n; ++i) y[i] = ywork[i];
                for (int it = 0; it < mc.inner_force_iters; ++it) {
                    Fbar.value_at_node(jg, m, x, Point(y, n), fv);
                    for (std::size_t i = 0; i < n; ++i) y[i] = ywork[i] + dt * fv[i];
                }
            }
        } else if (n == 1) {
            // deterministic characteristics: interpolate through the distinct
            // (position, value) samples; a kernel average would see only one
            // or two distinct characteristics per cell and pick up O(h) bias
            thread_local std::vector<double> pos, vals;
            pos.clear();
            vals.clear();
            for (std::size_t p = 0; p < P; ++p) {
                pos.push_back(batch.x_at(p, l)[0]);
                vals.push_back(batch.y_at(p, l)[0]);
            }
            detail::scatter_interp_1d(grid, pos, vals, 1, slice);
        } else {
            // deterministic paths in several dimensions: hat-weighted mean;
            // nodes without support keep the previous feedback value
            thread_local std::vector<double> wsum, acc;
            wsum.assign(total, 0.0);
            acc.assign(total * n, 0.0);
            for (std::size_t p = 0; p < P; ++p) {
                const double* yp = batch.y_at(p, l);
                grid.for_each_corner(Point(batch.x_at(p, l), n), [&](std::size_t m, double w) {
                    wsum[m] += w;
                    for (std::size_t i = 0; i < n; ++i) acc[m * n + i] += w * yp[i];
                });
            }
            for (std::size_t m = 0; m < total; ++m) {
                double* y = slice + m * n;
                if (wsum[m] > 1e-12) {
                    for (std::size_t i = 0; i < n; ++i) y[i] = acc[m * n + i] / wsum[m];
                } else if (prev_feedback) {
                    for (std::size_t i = 0; i < n; ++i) y[i] = prev_feedback->at(l, m, i);
                    ++res.warnings.ridge_fallbacks;
                } else {
                    for (std::size_t i = 0; i < n; ++i) y[i] = 0.0;
                    ++res.warnings.ridge_fallbacks;
                }
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Local Picard solve.
// ---------------------------------------------------------------------------

struct LocalSolution {
    std::size_t j_begin = 0, j_end = 0;
    SpaceTimeField ybar;  // includes gradient channel when the derivative solve ran
    double sup_norm = 0.0;
    double lipschitz_x = 0.0;
    IterationLog log;
    bool bound_ok = true;
    double bound_level = 0.0;
    bool window_length_warning = false;  // window exceeded the contraction estimate
    BasisWarnings warnings;
    double K = 0.0, C = 0.0, gamma = 0.0;  // recorded by the continuation driver
};


/// Picard iteration of the contraction map on one window: simulate the
/// forward SDE with the current feedback field, run the backward regression,
/// and take the fitted field as the next feedback; stop when the sup-grid
/// distance between sweeps drops below tol. Non-convergence is reported in
/// the log, never silently. Driver increments are drawn once and reused
/// across sweeps, so the iterated map is deterministic.
inline LocalSolution picard_local_solve(const TransformedForce& Fbar,
                                        const TerminalCondition& terminal, double nu,
                                        std::size_t j_begin, std::size_t j_end,
                                        const SpatialGrid& grid, const McParams& mc,
                                        double bound_level = 0.0,
                                        FbsdeBatch* out_batch = nullptr,
                                        double gamma_hint = 0.0) {
    if (j_end <= j_begin) throw std::invalid_argument("picard_local_solve: empty window");
    const NoiseField& eta_bar = Fbar.eta();
    if (j_end > eta_bar.time_grid().steps())
        throw std::invalid_argument("picard_local_solve: window exceeds the noise grid");
    const std::size_t S = j_end - j_begin;
    const std::size_t n = grid.dim();
    const double dt = eta_bar.time_grid().dt();

    FbsdeBatch batch;
    batch.j_begin = j_begin;
    batch.j_end = j_end;
    batch.dim = n;
    batch.dt = dt;
    batch.seed = mc.seed;
    std::vector<double> starts;
    detail::stratified_starts(grid, mc.paths, starts, batch.paths);
    batch.X.assign(batch.paths * (S + 1) * n, 0.0);
    batch.Y.assign(batch.paths * (S + 1) * n, 0.0);
    batch.Z.assign(batch.paths * (S + 1) * n * n, 0.0);
    if (nu > 0.0) detail::fill_drivers(batch, mc);
    else batch.dW.assign(batch.paths * S * n, 0.0);

    LocalSolution sol;
    sol.j_begin = j_begin;
    sol.j_end = j_end;
    sol.bound_level = bound_level;
    if (gamma_hint > 0.0 && static_cast<double>(S) * dt > gamma_hint + 1e-12)
        sol.window_length_warning = true;  // reported, never refused

    // initial feedback: terminal data broadcast across the window
    SpaceTimeField feedback(TimeGrid(dt * static_cast<double>(S), S), grid, n);
    {
        std::vector<double> x(n);
        for (std::size_t m = 0; m < grid.total_nodes(); ++m) {
            grid.node_point(m, x);
            terminal.value(x, std::span<double>(feedback.slice(S) + m * n, n));
        }
        for (std::size_t l = 0; l < S; ++l)
            std::copy(feedback.slice(S), feedback.slice(S) + grid.total_nodes() * n,
                      feedback.slice(l));
    }

    BackwardPassResult pass;
    for (int sweep = 0; sweep < mc.max_sweeps; ++sweep) {
        parallel_for_blocks(batch.paths, mc.threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p)
                euler_forward(Point(starts.data() + p * n, n), j_begin, S, feedback, eta_bar,
                              nu, std::span<const double>(batch.dw_at(p, 0), S * n),
                              std::span<double>(batch.x_at(p, 0), (S + 1) * n), mc);
        });
        pass = regress_backward(batch, terminal, Fbar, nu, grid, mc, &feedback);
        const double dist = sup_distance(pass.yfield, feedback);
        sol.log.distances.push_back(dist);
        feedback = pass.yfield;
        if (dist < mc.tol) break;
    }
    sol.log.finish(mc.tol);
    sol.warnings = pass.warnings;
    sol.ybar = std::move(feedback);
    sol.sup_norm = sol.ybar.sup_norm();

    double lip = 0.0;
    for (std::size_t l = 0; l <= S; ++l)
        for (std::size_t m = 0; m < grid.total_nodes(); ++m)
            for (std::size_t a = 0; a < n; ++a) {
                const std::size_t mp = grid.neighbor(m, a, +1);
                for (std::size_t i = 0; i < n; ++i)
                    lip = std::max(lip, std::fabs(sol.ybar.at(l, mp, i) - sol.ybar.at(l, m, i)) /
                                            grid.spacing(a));
            }
    sol.lipschitz_x = lip;
    if (bound_level > 0.0) sol.bound_ok = sol.sup_norm <= bound_level;
    if (out_batch) *out_batch = std::move(batch);
    return sol;
}

// ---------------------------------------------------------------------------
// First-derivative processes.
// ---------------------------------------------------------------------------

/// Linear derivative FBSDEs along the base paths, all directions at once:
///   dX^k_{l+1} = dX^k_l - (grad eta_bar(t_l, X_l) dX^k_l + dY^k_l) dt, dX^k_0 = e_k,
///   dY^k_S   = grad h(X_S) dX^k_S,
///   dY^k_l   = E[dY^k_{l+1} | X_l, dX^k_l] + (grad1 F dX^k_l + grad2 F dY^k_l) dt.
/// Conditional expectations regress onto {phi_b(X) dX_m}; the fitted
/// coefficients, pooled across directions, are exactly the spatial gradient
/// field of ybar, which is written into ybar.gradient (and the window-start
/// slice defines the gradient channel of the local solution). A short Picard
/// loop resolves the forward-backward coupling of the linear system.
inline void derivative_fbsde_solve(FbsdeBatch& batch, const TerminalCondition& terminal,
                                   const TransformedForce& Fbar, double nu,
                                   const SpatialGrid& grid, SpaceTimeField& ybar,
                                   const McParams& mc, BasisWarnings* warn_out = nullptr) {
    if (!terminal.gradient)
        throw std::invalid_argument("derivative_fbsde_solve: terminal gradient missing");
    if (!Fbar.force().dx || !Fbar.force().dy)
        throw std::invalid_argument("derivative_fbsde_solve: force derivatives missing");
    const std::size_t S = batch.steps();
    const std::size_t P = batch.paths;
    const std::size_t n = batch.dim;
    const double dt = batch.dt;
    const std::size_t total = grid.total_nodes();
    if (ybar.gradient.empty()) ybar.alloc_gradient();

    batch.dX.assign(n * P * (S + 1) * n, 0.0);
    batch.dY.assign(n * P * (S + 1) * n, 0.0);
    BasisWarnings warnings;

    RegressionBasis basis(mc.basis, grid, mc.basis_order);

    std::vector<std::pair<std::size_t, double>> brow, arow;
    std::vector<double> ge(n * n), a1(n * n), a2(n * n), cond(n), v(n), tg(n * n), x(n);
    std::vector<double> prev_dy0(n * P * n, 0.0);

    const int max_dsweeps = 8;
    for (int sweep = 0; sweep < max_dsweeps; ++sweep) {
        // forward tangents, using the previous sweep's dY in the drift
        parallel_for_blocks(P, mc.threads, [&](std::size_t pb, std::size_t pe) {
            std::vector<double> ge_l(n * n);
            for (std::size_t p = pb; p < pe; ++p) {
                for (std::size_t k = 0; k < n; ++k) {
                    double* dx0 = batch.dx_at(k, p, 0);
                    for (std::size_t i = 0; i < n; ++i) dx0[i] = (i == k) ? 1.0 : 0.0;
                }
                for (std::size_t l = 0; l < S; ++l) {
                    Fbar.eta().eval_grad(batch.j_begin + l, Point(batch.x_at(p, l), n), ge_l);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double* dx = batch.dx_at(k, p, l);
                        const double* dy = batch.dy_at(k, p, l);
                        double* dxn = batch.dx_at(k, p, l + 1);
                        for (std::size_t i = 0; i < n; ++i) {
                            double drift = dy[i];
                            for (std::size_t a = 0; a < n; ++a) drift += ge_l[i * n + a] * dx[a];
                            dxn[i] = dx[i] - dt * drift;
                        }
                    }
                }
            }
        });

        // terminal tangents
        for (std::size_t p = 0; p < P; ++p) {
            terminal.gradient(Point(batch.x_at(p, S), n), ge);
            for (std::size_t k = 0; k < n; ++k) {
                const double* dx = batch.dx_at(k, p, S);
                double* dy = batch.dy_at(k, p, S);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t a = 0; a < n; ++a) s += ge[i * n + a] * dx[a];
                    dy[i] = s;
                }
            }
        }

        // backward recursion with pooled regression
        for (std::size_t l_plus = S; l_plus-- > 0;) {
            const std::size_t l = l_plus;
            const std::size_t jg = batch.j_begin + l;
            LeastSquaresFit fit(basis, n);
            const bool use_regression = nu > 0.0;
            if (use_regression) {
                for (std::size_t p = 0; p < P; ++p) {
                    basis.eval(Point(batch.x_at(p, l), n), brow);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double* dx = batch.dx_at(k, p, l);
                        arow.clear();
                        for (const auto& [b, w] : brow)
                            for (std::size_t m2 = 0; m2 < n; ++m2)
                                arow.emplace_back(b * n + m2, w * dx[m2]);
                        fit.add_row(arow, std::span<const double>(batch.dy_at(k, p, l + 1), n));
                    }
                }
                fit.solve(warnings);
            }
            for (std::size_t p = 0; p < P; ++p) {
                Point xp(batch.x_at(p, l), n);
                Point yp(batch.y_at(p, l), n);
                Fbar.d1(jg, xp, yp, a1);
                Fbar.d2(jg, xp, yp, a2);
                if (use_regression) basis.eval(xp, brow);
                for (std::size_t k = 0; k < n; ++k) {
                    const double* dx = batch.dx_at(k, p, l);
                    double* dy = batch.dy_at(k, p, l);
                    if (use_regression) {
                        arow.clear();
                        for (const auto& [b, w] : brow)
                            for (std::size_t m2 = 0; m2 < n; ++m2)
                                arow.emplace_back(b * n + m2, w * dx[m2]);
                        fit.evaluate_row(arow, cond);
                    } else {
                        const double* next = batch.dy_at(k, p, l + 1);
                        for (std::size_t i = 0; i < n; ++i) cond[i] = next[i];
                    }
                    for (std::size_t i = 0; i < n; ++i) v[i] = cond[i];
                    for (int it = 0; it < mc.inner_force_iters; ++it) {
                        for (std::size_t i = 0; i < n; ++i) {
                            double s = 0.0;
                            for (std::size_t a = 0; a < n; ++a)
                                s += a1[i * n + a] * dx[a] + a2[i * n + a] * v[a];
                            tg[i] = cond[i] + dt * s;
                        }
                        for (std::size_t i = 0; i < n; ++i) v[i] = tg[i];
                    }
                    for (std::size_t i = 0; i < n; ++i) dy[i] = v[i];
                }
            }

            // gradient field slice
            if (use_regression) {
                for (std::size_t m = 0; m < total; ++m) {
                    grid.node_point(m, x);
                    basis.eval(x, brow);
                    Point ym(ybar.slice(l) + m * n, n);
                    Fbar.d1(jg, x, ym, a1);
                    Fbar.d2(jg, x, ym, a2);
                    for (std::size_t k = 0; k < n; ++k) {
                        arow.clear();
                        for (const auto& [b, w] : brow) arow.emplace_back(b * n + k, w);
                        fit.evaluate_row(arow, cond);
                        for (std::size_t i = 0; i < n; ++i) v[i] = cond[i];
                        for (int it = 0; it < mc.inner_force_iters; ++it) {
                            for (std::size_t i = 0; i < n; ++i) {
                                double s = 0.0;
                                for (std::size_t a = 0; a < n; ++a)
                                    s += a1[i * n + a] * (a == k ? 1.0 : 0.0) + a2[i * n + a] * v[a];
                                tg[i] = cond[i] + dt * s;
                            }
                            for (std::size_t i = 0; i < n; ++i) v[i] = tg[i];
                        }
                        for (std::size_t i = 0; i < n; ++i) ybar.grad_at(l, m, i, k) = v[i];
                    }
                }
            } else {
                // deterministic paths: per-node weighted solves of
                // dY = G dX for the n x n gradient block
                thread_local std::vector<double> amat, bmat;
                amat.assign(total * n * n, 0.0);
                bmat.assign(total * n * n, 0.0);
                for (std::size_t p = 0; p < P; ++p) {
                    grid.for_each_corner(Point(batch.x_at(p, l), n), [&](std::size_t m, double w) {
                        for (std::size_t k = 0; k < n; ++k) {
                            const double* dx = batch.dx_at(k, p, l);
                            const double* dy = batch.dy_at(k, p, l);
                            for (std::size_t a = 0; a < n; ++a)
                                for (std::size_t c = 0; c < n; ++c) {
                                    amat[m * n * n + a * n + c] += w * dx[a] * dx[c];
                                    bmat[m * n * n + a * n + c] += w * dy[a] * dx[c];
                                }
                        }
                    });
                }
                std::vector<double> afac(n * n), rhs(n);
                for (std::size_t m = 0; m < total; ++m) {
                    for (std::size_t q = 0; q < n * n; ++q) afac[q] = amat[m * n * n + q];
                    if (!cholesky_factor(afac, n)) {
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t k = 0; k < n; ++k) ybar.grad_at(l, m, i, k) = 0.0;
                        ++warnings.ridge_fallbacks;
                        continue;
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t k = 0; k < n; ++k) rhs[k] = bmat[m * n * n + i * n + k];
                        cholesky_solve(afac, n, rhs);
                        for (std::size_t k = 0; k < n; ++k) ybar.grad_at(l, m, i, k) = rhs[k];
                    }
                }
            }
        }

        // terminal slice gradient
        for (std::size_t m = 0; m < total; ++m) {
            grid.node_point(m, x);
            terminal.gradient(x, ge);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < n; ++k) ybar.grad_at(S, m, i, k) = ge[i * n + k];
        }

        // sweep-to-sweep change of the start-slice tangents
        double dist = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t p = 0; p < P; ++p) {
                const double* dy = batch.dy_at(k, p, 0);
                double* prev = prev_dy0.data() + (k * P + p) * n;
                for (std::size_t i = 0; i < n; ++i) {
                    dist = std::max(dist, std::fabs(dy[i] - prev[i]));
                    prev[i] = dy[i];
                }
            }
        if (dist < mc.tol) break;
    }
    if (warn_out) *warn_out = warnings;
}

// ---------------------------------------------------------------------------
// Markov identity check.
// ---------------------------------------------------------------------------

struct MarkovReport {
    double max_discrepancy = 0.0;
    double mean_discrepancy = 0.0;
    double mc_stderr = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::size_t samples = 0;
};

/// Verify Y_t = ybar(t, X_t) on freshly simulated paths: simulate forward
/// with the converged feedback, rerun the backward regression on the fresh
/// batch, and compare the path values against the interpolated field. The
/// discrepancy is dominated by the check's own accumulated regression noise,
/// so MC-stderr is estimated max-aligned from a half-sample split of the
/// fresh batch (the two half fits differ by about twice the full-batch
/// fluctuation at the worst grid point).
inline MarkovReport markov_identity_check(const LocalSolution& sol, const TransformedForce& Fbar,
                                          const TerminalCondition& terminal, double nu,
                                          const SpatialGrid& grid, const McParams& mc,
                                          std::size_t samples = 2000) {
    McParams fresh = mc;
    fresh.paths = std::max(samples, 2 * grid.total_nodes());
    fresh.seed = derive_seed(mc.seed, 0x4D41524Bull);

    const std::size_t S = sol.j_end - sol.j_begin;
    const std::size_t n = grid.dim();
    const double dt = Fbar.eta().time_grid().dt();

    FbsdeBatch batch;
    batch.j_begin = sol.j_begin;
    batch.j_end = sol.j_end;
    batch.dim = n;
    batch.dt = dt;
    batch.seed = fresh.seed;
    std::vector<double> starts;
    detail::stratified_starts(grid, fresh.paths, starts, batch.paths);
    batch.X.assign(batch.paths * (S + 1) * n, 0.0);
    batch.Y.assign(batch.paths * (S + 1) * n, 0.0);
    batch.Z.assign(batch.paths * (S + 1) * n * n, 0.0);
    if (nu > 0.0) detail::fill_drivers(batch, fresh);
    else batch.dW.assign(batch.paths * S * n, 0.0);

    parallel_for_blocks(batch.paths, fresh.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p)
            euler_forward(Point(starts.data() + p * n, n), sol.j_begin, S, sol.ybar, Fbar.eta(),
                          nu, std::span<const double>(batch.dw_at(p, 0), S * n),
                          std::span<double>(batch.x_at(p, 0), (S + 1) * n), fresh);
    });
    regress_backward(batch, terminal, Fbar, nu, grid, fresh);

    MarkovReport rep;
    rep.samples = batch.paths;
    std::vector<double> yv(n);
    double total_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < batch.paths; ++p) {
        for (std::size_t l = 0; l <= S; ++l) {
            sol.ybar.eval(l, Point(batch.x_at(p, l), n), yv);
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                d = std::max(d, std::fabs(batch.y_at(p, l)[i] - yv[i]));
            rep.max_discrepancy = std::max(rep.max_discrepancy, d);
            total_sum += d;
            ++count;
        }
    }
    rep.mean_discrepancy = count ? total_sum / static_cast<double>(count) : 0.0;

    if (nu > 0.0 && rep.max_discrepancy > 0.0) {
        auto h0 = detail::half_batch(batch, 0);
        auto h1 = detail::half_batch(batch, 1);
        auto f0 = regress_backward(h0, terminal, Fbar, nu, grid, fresh);
        auto f1 = regress_backward(h1, terminal, Fbar, nu, grid, fresh);
        rep.mc_stderr = 0.5 * sup_distance(f0.yfield, f1.yfield);
    }
    rep.tolerance = mc.markov_tol_factor * mc.tol + 3.0 * rep.mc_stderr;
    rep.pass = rep.max_discrepancy <= rep.tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Global continuation over stitched windows.
// ---------------------------------------------------------------------------

struct WindowPolicy {
    enum class Mode { auto_constants, fixed_steps };
    Mode mode = Mode::auto_constants;
    std::size_t fixed_steps = 0;          // used by fixed_steps mode
    std::optional<double> bound_M;        // cutoff level override
    bool with_gradient = true;
};

struct WindowRecord {
    std::size_t j_begin = 0, j_end = 0;  // reversed-clock indices
    IterationLog log;
    double K = 0.0, C = 0.0, gamma = 0.0;
    double sup_norm = 0.0, lipschitz_x = 0.0;
    bool bound_ok = true;
    bool length_warning = false;  // window longer than the contraction estimate
};

struct GlobalSolution {
    SpaceTimeField yhat;  // forward-time orientation, full grid
    std::vector<WindowRecord> windows;
    bool completed = false;
    std::string failure;
    double K = 0.0, C = 0.0, M = 0.0, M1 = 0.0;
    double gamma_first = 0.0, gamma_later = 0.0;
};

/// Backward-window continuation: solve on the last reversed-clock window with
/// terminal data h, then repeatedly on the preceding window with the previous
/// solution's start slice as terminal data, with the window length re-derived
/// from K1 = K + M1 after the first window. The stitched reversed field is
/// returned in forward orientation (yhat(t) = ybar(T-t)); add eta back via
/// reconstruct() for y. Non-convergence of any window aborts with the partial
/// field and the failing window recorded.
inline GlobalSolution global_continuation(const BurgersProblem& problem, const NoiseField& eta,
                                          const SpatialGrid& grid, const McParams& mc,
                                          const WindowPolicy& policy = {}) {
    problem.validate();
    if (!(grid == eta.space_grid()))
        throw std::invalid_argument("global_continuation: noise field lives on a different grid");
    const TimeGrid& tg = eta.time_grid();
    const std::size_t steps = tg.steps();
    const std::size_t n = problem.dim;
    const double dt = tg.dt();

    auto eta_bar = std::make_shared<const NoiseField>(time_reverse(eta));
    TransformedForce F_plain(problem.f, problem.viscosity, eta_bar, true, std::nullopt);

    GlobalSolution out;
    // cutoff level: Gronwall-style default 2 sup|h| + T sup|F(.,.,0)|
    if (policy.bound_M) {
        out.M = *policy.bound_M;
    } else {
        double sup_h = 0.0, sup_f0 = 0.0;
        std::vector<double> x(n), hv(n), fv(n), y0(n, 0.0);
        for (std::size_t m = 0; m < grid.total_nodes(); ++m) {
            grid.node_point(m, x);
            problem.h.value(x, hv);
            for (double v : hv) sup_h = std::max(sup_h, std::fabs(v));
        }
        const std::size_t tstride = std::max<std::size_t>(1, steps / 16);
        const std::size_t mstride = std::max<std::size_t>(1, grid.total_nodes() / 64);
        for (std::size_t j = 0; j <= steps; j += tstride)
            for (std::size_t m = 0; m < grid.total_nodes(); m += mstride) {
                grid.node_point(m, x);
                F_plain.value(j, x, y0, fv);
                for (double v : fv) sup_f0 = std::max(sup_f0, std::fabs(v));
            }
        out.M = std::max(2.0 * sup_h + tg.horizon() * sup_f0, 1.0);
    }
    TransformedForce Fbar = cutoff_force(F_plain, out.M);

    TerminalCondition terminal = terminal_from_initial(problem.h);
    const ConstantsKC kc = estimate_constants(Fbar, terminal, grid, out.M + 1.0);
    out.K = kc.K;
    out.C = kc.C;
    out.gamma_first = estimate_window_length(kc.K, kc.C, mc.window_safety, tg.horizon());

    auto steps_for = [&](double gamma) {
        const auto s = static_cast<std::size_t>(std::floor(gamma / dt));
        return std::clamp<std::size_t>(s, 1, steps);
    };
    std::size_t window_steps = policy.mode == WindowPolicy::Mode::fixed_steps
                                   ? std::clamp<std::size_t>(policy.fixed_steps, 1, steps)
                                   : steps_for(out.gamma_first);

    SpaceTimeField ybar_glob(tg, grid, n);
    if (policy.with_gradient) ybar_glob.alloc_gradient();

    std::size_t j_hi = steps;
    bool first = true;
    out.completed = true;
    while (true) {
        const std::size_t j_lo = j_hi > window_steps ? j_hi - window_steps : 0;
        const double gamma_here = first ? out.gamma_first : out.gamma_later;
        FbsdeBatch batch;
        LocalSolution sol = picard_local_solve(Fbar, terminal, problem.viscosity, j_lo, j_hi,
                                               grid, mc, out.M, &batch);
        sol.K = kc.K;
        sol.C = kc.C;
        sol.gamma = gamma_here;
        if (policy.with_gradient && sol.log.converged)
            derivative_fbsde_solve(batch, terminal, Fbar, problem.viscosity, grid, sol.ybar, mc);

        WindowRecord rec;
        rec.j_begin = j_lo;
        rec.j_end = j_hi;
        rec.log = sol.log;
        rec.K = kc.K;
        rec.C = kc.C;
        rec.gamma = gamma_here;
        rec.sup_norm = sol.sup_norm;
        rec.lipschitz_x = sol.lipschitz_x;
        rec.bound_ok = sol.bound_ok;
        rec.length_warning =
            gamma_here > 0.0 && static_cast<double>(j_hi - j_lo) * dt > gamma_here + 1e-12;
        out.windows.push_back(rec);

        // stitch (junction slice shared exactly: the terminal interpolant is
        // exact at nodes)
        const std::size_t S = j_hi - j_lo;
        for (std::size_t l = 0; l <= S; ++l) {
            const double* src = sol.ybar.slice(l);
            double* dst = ybar_glob.slice(j_lo + l);
            std::copy(src, src + grid.total_nodes() * n, dst);
            if (policy.with_gradient && sol.ybar.has_gradient()) {
                const std::size_t gper = grid.total_nodes() * n * n;
                std::copy(sol.ybar.gradient.data() + l * gper,
                          sol.ybar.gradient.data() + (l + 1) * gper,
                          ybar_glob.gradient.data() + (j_lo + l) * gper);
            }
        }

        if (!sol.log.converged) {
            out.completed = false;
            std::ostringstream os;
            os << "window [" << j_lo << "," << j_hi << "] did not converge after "
               << sol.log.sweeps << " sweeps (last distance "
               << (sol.log.distances.empty() ? 0.0 : sol.log.distances.back()) << ")";
            out.failure = os.str();
            break;
        }

        if (first) {
            out.M1 = sol.lipschitz_x;
            out.gamma_later =
                estimate_window_length(kc.K + out.M1, kc.C, mc.window_safety, tg.horizon());
            if (policy.mode == WindowPolicy::Mode::auto_constants)
                window_steps = steps_for(out.gamma_later);
            first = false;
        }

        if (j_lo == 0) break;
        std::vector<double> nodal(sol.ybar.slice(0),
                                  sol.ybar.slice(0) + grid.total_nodes() * n);
        terminal = terminal_from_nodal(grid, std::move(nodal), n);
        j_hi = j_lo;
    }

    out.yhat = time_reverse(ybar_glob);
    return out;
}

}  // namespace sburgers
