#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sburgers/fields.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/noise_field.hpp"
#include "sburgers/problem.hpp"
#include "sburgers/transformed_force.hpp"

namespace sburgers {

struct CflError : std::runtime_error {
    CflError(double observed, double required_dt_, double at_time)
        : std::runtime_error(make_message(observed, required_dt_, at_time)),
          required_dt(required_dt_), time(at_time) {}
    double required_dt;
    double time;

private:
    static std::string make_message(double observed, double req, double t) {
        std::ostringstream os;
        os << "advective CFL " << observed << " exceeds limit at t=" << t
           << "; reduce dt to <= " << req;
        return os.str();
    }
};

struct BlowUpError : std::runtime_error {
    explicit BlowUpError(double at_time)
        : std::runtime_error("solution lost finiteness at t=" + std::to_string(at_time)),
          time(at_time) {}
    double time;
};

struct StabilityReport {
    double max_cfl_observed = 0.0;
    double required_dt = 0.0;
};

struct GridSpec {
    SpatialGrid space;
    TimeGrid time;
    double max_cfl = 0.5;
    StabilityReport report;

    GridSpec(SpatialGrid sg, TimeGrid tg) : space(std::move(sg)), time(tg) {
        for (std::size_t a = 0; a < space.dim(); ++a)
            if (space.nodes(a) < 8)
                throw std::invalid_argument("GridSpec: need at least 8 nodes per dimension");
    }
};

struct FdOptions {
    bool advection = true;  // off: pure advection-free parabolic stepping, for validation
    // Fold the modified-equation diffusion of the upwind/explicit step,
    // |v_a| h_a/2 - v_a^2 dt/2, into the implicit coefficient (clipped at 0,
    // so the stencil stays an M-matrix and nu=0 remains pure upwind).
    bool compensate_upwind_diffusion = true;
};

namespace detail {

/// Solve (I - coef(m) D_aa) u = rhs along every grid line of one axis,
/// component by component; coef holds dt * nu_eff per node (>= 0), constant
/// within each matrix row, which keeps the system an M-matrix. Periodic lines
/// use the cyclic solver; box lines get zero-gradient ghosts (constant
/// extension).
inline void implicit_diffusion_axis(const SpatialGrid& sg, std::size_t axis,
                                    std::span<const double> coef_dt,
                                    std::vector<double>& field, std::size_t comp) {
    const std::size_t na = sg.nodes(axis);
    const std::size_t st = sg.stride(axis);
    const std::size_t total = sg.total_nodes();
    const double h = sg.spacing(axis);
    const double inv_h2 = 1.0 / (h * h);

    std::vector<double> diag(na), lower(na), upper(na), line(na), work, scratch;
    for (std::size_t base = 0; base < total; ++base) {
        if ((base / st) % na != 0) continue;  // not a line start
        bool any = false;
        for (std::size_t i = 0; i < na; ++i) {
            const double r = coef_dt[base + i * st] * inv_h2;
            if (r != 0.0) any = true;
            diag[i] = 1.0 + 2.0 * r;
            lower[i] = -r;
            upper[i] = -r;
        }
        if (!any) continue;
        if (!sg.periodic()) {
            const double r0 = coef_dt[base] * inv_h2;
            const double rn = coef_dt[base + (na - 1) * st] * inv_h2;
            diag[0] = 1.0 + r0;
            diag[na - 1] = 1.0 + rn;
        }
        for (std::size_t c = 0; c < comp; ++c) {
            for (std::size_t i = 0; i < na; ++i) line[i] = field[(base + i * st) * comp + c];
            if (sg.periodic()) {
                cyclic_thomas_solve(lower, diag, upper, line, work);
            } else {
                std::span<const double> lo(lower.data() + 1, na - 1);
                std::span<const double> up(upper.data(), na - 1);
                thomas_solve(lo, diag, up, line, scratch);
            }
            for (std::size_t i = 0; i < na; ++i) field[(base + i * st) * comp + c] = line[i];
        }
    }
}

}  // namespace detail

/// March the substituted equation forward in time:
///   d yhat/dt = nu Lap yhat - (eta + yhat, grad) yhat + F(t, x, yhat),
/// with first-order upwind advection on the total velocity eta + yhat,
/// explicit force, and implicit (dimension-factored) diffusion. By default
/// the implicit coefficient absorbs the upwind/explicit truncation diffusion
/// (see FdOptions), which removes the leading O(h) error while keeping the
/// M-matrix structure. Returns yhat; compose with reconstruct() for y. The
/// slice at time t only reads eta on [0, t], so the scheme is adapted by
/// construction.
inline SpaceTimeField fd_solve_forward(const BurgersProblem& problem, const NoiseField& eta,
                                       GridSpec& grid, const FdOptions& options = {}) {
    problem.validate();
    if (!(grid.time == eta.time_grid()) || !(grid.space == eta.space_grid()))
        throw std::invalid_argument("fd_solve_forward: noise field lives on a different grid");

    const SpatialGrid& sg = grid.space;
    const TimeGrid& tg = grid.time;
    const std::size_t n = problem.dim;
    const std::size_t total = sg.total_nodes();
    const double dt = tg.dt();
    const double hmin = sg.min_spacing();

    // non-owning view; eta outlives this call
    std::shared_ptr<const NoiseField> eta_view(std::shared_ptr<void>(), &eta);
    TransformedForce F(problem.f, problem.viscosity, eta_view);

    SpaceTimeField out(tg, sg, n);
    std::vector<double> x(n);
    for (std::size_t m = 0; m < total; ++m) {
        sg.node_point(m, x);
        problem.h.value(x, std::span<double>(out.slice(0) + m * n, n));
    }

    std::vector<double> rhs(total * n), vel(total * n), fv(n);
    std::vector<std::vector<double>> coef(n);
    for (auto& c : coef) c.assign(total, 0.0);
    grid.report = {};
    for (std::size_t j = 0; j < tg.steps(); ++j) {
        const double* cur = out.slice(j);
        double* nxt = out.slice(j + 1);

        // total velocity and CFL bookkeeping
        double vmax = 0.0;
        const double* eta_j = eta.slice(0, j);
        for (std::size_t q = 0; q < total * n; ++q) {
            vel[q] = eta_j[q] + cur[q];
            vmax = std::max(vmax, std::fabs(vel[q]));
        }
        const double cfl = vmax * dt / hmin;
        grid.report.max_cfl_observed = std::max(grid.report.max_cfl_observed, cfl);
        if (options.advection && cfl > grid.max_cfl) {
            grid.report.required_dt = grid.max_cfl * hmin / vmax;
            throw CflError(cfl, grid.report.required_dt, tg.time(j));
        }

        for (std::size_t m = 0; m < total; ++m) {
            sg.node_point(m, x);
            F.value_at_node(j, m, x, std::span<const double>(cur + m * n, n), fv);
            for (std::size_t i = 0; i < n; ++i) {
                double adv = 0.0;
                if (options.advection) {
                    for (std::size_t a = 0; a < n; ++a) {
                        const double va = vel[m * n + a];
                        const double ha = sg.spacing(a);
                        if (va > 0.0) {
                            const std::size_t mm = sg.neighbor(m, a, -1);
                            adv += va * (cur[m * n + i] - cur[mm * n + i]) / ha;
                        } else if (va < 0.0) {
                            const std::size_t mp = sg.neighbor(m, a, +1);
                            adv += va * (cur[mp * n + i] - cur[m * n + i]) / ha;
                        }
                    }
                }
                rhs[m * n + i] = cur[m * n + i] + dt * (fv[i] - adv);
            }
        }

        for (std::size_t a = 0; a < n; ++a) {
            const double ha = sg.spacing(a);
            bool all_zero = true;
            for (std::size_t m = 0; m < total; ++m) {
                double nu_eff = problem.viscosity;
                if (options.advection && options.compensate_upwind_diffusion) {
                    const double va = vel[m * n + a];
                    nu_eff += -std::fabs(va) * ha * 0.5 + va * va * dt * 0.5;
                    if (nu_eff < 0.0) nu_eff = 0.0;
                }
                coef[a][m] = nu_eff * dt;
                if (coef[a][m] != 0.0) all_zero = false;
            }
            if (!all_zero) detail::implicit_diffusion_axis(sg, a, coef[a], rhs, n);
        }

        for (std::size_t q = 0; q < total * n; ++q) {
            if (!std::isfinite(rhs[q])) throw BlowUpError(tg.time(j + 1));
            nxt[q] = rhs[q];
        }
    }
    return out;
}

/// Roll the node values of each time slice by whole nodes along each axis.
inline SpaceTimeField shift_field(const SpaceTimeField& u, std::span<const long> shift_nodes) {
    SpaceTimeField out = u;
    const std::size_t n = u.space.dim();
    std::vector<std::size_t> idx(n);
    for (std::size_t j = 0; j < u.time.slices(); ++j) {
        const double* src = u.slice(j);
        double* dst = out.slice(j);
        for (std::size_t m = 0; m < u.space.total_nodes(); ++m) {
            std::size_t rest = m;
            std::size_t target = 0;
            std::size_t mult = 1;
            for (std::size_t a = 0; a < n; ++a) {
                const std::size_t na = u.space.nodes(a);
                const long i = static_cast<long>(rest % na);
                rest /= na;
                long k = (i + shift_nodes[a]) % static_cast<long>(na);
                if (k < 0) k += static_cast<long>(na);
                target += static_cast<std::size_t>(k) * mult;
                mult *= na;
            }
            for (std::size_t c = 0; c < u.comp; ++c) dst[target * u.comp + c] = src[m * u.comp + c];
        }
    }
    return out;
}

/// Shift-equivariance probe: solve with data translated by a whole number of
/// nodes and compare against the translated solution of the original data.
/// `shift` is in coordinate units and must be node-aligned.
inline double periodic_shift_check(const BurgersProblem& problem, const BrownianPath& brownian,
                                   GridSpec& grid, std::span<const double> shift) {
    if (!grid.space.periodic())
        throw std::invalid_argument("periodic_shift_check: requires a periodic grid");
    const std::size_t n = problem.dim;
    std::vector<long> nodes(n);
    for (std::size_t a = 0; a < n; ++a) {
        const double k = shift[a] / grid.space.spacing(a);
        const double r = std::round(k);
        if (std::fabs(k - r) > 1e-9)
            throw std::invalid_argument("periodic_shift_check: shift must be a whole number of nodes");
        nodes[a] = static_cast<long>(r);
    }

    auto wrap_point = [&problem, n](Point x, std::span<const double> delta,
                                    std::vector<double>& buf) -> Point {
        buf.resize(n);
        for (std::size_t a = 0; a < n; ++a) {
            double v = x[a] - delta[a];
            const double lo = problem.domain[a].lo;
            const double len = problem.domain[a].hi - lo;
            v = lo + std::fmod(std::fmod(v - lo, len) + len, len);
            buf[a] = v;
        }
        return Point(buf.data(), n);
    };

    std::vector<double> delta(shift.begin(), shift.end());
    BurgersProblem shifted = problem;
    shifted.h.value = [h = problem.h, wrap_point, delta](Point x, std::span<double> out) {
        std::vector<double> buf;
        h.value(wrap_point(x, delta, buf), out);
    };
    shifted.h.gradient = [h = problem.h, wrap_point, delta](Point x, std::span<double> out) {
        std::vector<double> buf;
        h.gradient(wrap_point(x, delta, buf), out);
    };
    shifted.h.hessian = [h = problem.h, wrap_point, delta](Point x, std::span<double> out) {
        std::vector<double> buf;
        h.hessian(wrap_point(x, delta, buf), out);
    };
    auto wrap_force = [wrap_point, delta](const auto& fn) {
        return [fn, wrap_point, delta](double t, Point x, Point y, std::span<double> out) {
            std::vector<double> buf;
            fn(t, wrap_point(x, delta, buf), y, out);
        };
    };
    shifted.f.value = wrap_force(problem.f.value);
    shifted.f.dx = wrap_force(problem.f.dx);
    shifted.f.dy = wrap_force(problem.f.dy);
    shifted.g.deriv = [g = problem.g, wrap_point, delta](std::span<const int> alpha, double t,
                                                         Point x, std::span<double> out) {
        std::vector<double> buf;
        g.deriv(alpha, t, wrap_point(x, delta, buf), out);
    };

    auto eta = synthesize_noise_field(problem.g, brownian, grid.space);
    auto eta_shifted = synthesize_noise_field(shifted.g, brownian, grid.space);

    GridSpec grid2 = grid;
    auto base = fd_solve_forward(problem, eta, grid);
    auto moved = fd_solve_forward(shifted, eta_shifted, grid2);
    auto rolled = shift_field(base, nodes);
    return sup_distance(moved, rolled);
}

}  // namespace sburgers
