#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "sburgers/analysis.hpp"
#include "sburgers/brownian.hpp"
#include "sburgers/cole_hopf.hpp"
#include "sburgers/fd_solver.hpp"

using namespace sburgers;

namespace {

BurgersProblem make_problem(double nu, std::size_t nodes_hint = 8) {
    BurgersProblem p;
    p.viscosity = nu;
    p.horizon = 1.0;
    p.dim = 1;
    p.noise_dim = 1;
    p.domain = {{-1.0, 1.0, nodes_hint}};
    p.h = h_zero(1);
    p.f = f_zero(1);
    p.g = g_zero(1, 1);
    return p;
}

}  // namespace

TEST_CASE("gauss-hermite rules integrate gaussian moments exactly") {
    const auto& rule = gauss_hermite(16);
    double m0 = 0, m2 = 0, m4 = 0, m1 = 0;
    for (std::size_t i = 0; i < 16; ++i) {
        m0 += rule.weights[i];
        m1 += rule.weights[i] * rule.nodes[i];
        m2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
        m4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
    }
    const double sp = std::sqrt(std::numbers::pi);
    REQUIRE(m0 == Catch::Approx(sp).margin(1e-12));
    REQUIRE(m1 == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(m2 == Catch::Approx(0.5 * sp).margin(1e-12));
    REQUIRE(m4 == Catch::Approx(0.75 * sp).margin(1e-12));
}

TEST_CASE("cole-hopf oracle trivial profiles") {
    REQUIRE(cole_hopf_oracle_1d(0.1, profile_zero(), 0.4, 0.3) == Catch::Approx(0.0).margin(1e-12));
    // constants travel unchanged
    for (double t : {0.1, 0.5, 1.0})
        REQUIRE(cole_hopf_oracle_1d(0.2, profile_constant(0.8), t, -0.4) ==
                Catch::Approx(0.8).margin(1e-10));
    // t = 0 reproduces the profile
    const auto prof = profile_sine(-1.0, std::numbers::pi);
    for (double x : {-0.7, 0.0, 0.42})
        REQUIRE(cole_hopf_oracle_1d(0.1 / std::numbers::pi, prof, 0.0, x) ==
                Catch::Approx(-std::sin(std::numbers::pi * x)).margin(1e-8));
}

TEST_CASE("zero data yields the zero field") {
    auto p = make_problem(0.1);
    GridSpec grid(p.make_grid(16), TimeGrid(1.0, 64));
    auto b = build_brownian(1, 1, 1.0, 64);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    auto yh = fd_solve_forward(p, eta, grid);
    for (double v : yh.values) REQUIRE(v == 0.0);
}

TEST_CASE("advection-free stepping reproduces the heat kernel") {
    const double nu = 0.05, sigma0 = 0.15;
    auto gaussian_h = [sigma0](std::size_t n) {
        InitialCondition h = h_zero(n);
        h.value = [sigma0](Point x, std::span<double> out) {
            out[0] = std::exp(-x[0] * x[0] / (2 * sigma0 * sigma0));
        };
        return h;
    };
    auto run = [&](std::size_t nodes, std::size_t steps) {
        auto p = make_problem(nu);
        p.horizon = 0.2;  // short enough that the gaussian never sees the wrap
        p.h = gaussian_h(1);
        GridSpec grid(p.make_grid(nodes), TimeGrid(0.2, steps));
        auto b = build_brownian(1, 1, 0.2, steps);
        auto eta = synthesize_noise_field(p.g, b, grid.space);
        FdOptions opt;
        opt.advection = false;
        auto yh = fd_solve_forward(p, eta, grid, opt);
        double worst = 0.0;
        for (std::size_t j = 0; j <= steps; ++j) {
            const double var = sigma0 * sigma0 + 2 * nu * grid.time.time(j);
            for (std::size_t m = 0; m < nodes; ++m) {
                const double x = grid.space.coord(0, m);
                const double exact = sigma0 / std::sqrt(var) * std::exp(-x * x / (2 * var));
                worst = std::max(worst, std::fabs(yh.at(j, m, 0) - exact));
            }
        }
        return worst;
    };
    const double e1 = run(128, 256);
    const double e2 = run(256, 512);
    const double hx = 2.0 / 128, dt = 0.5 / 256;
    REQUIRE(e1 <= 2.0 * (hx * hx + dt) * 5.0);  // scale from |u_tt| ~ nu^2/sigma^4
    REQUIRE(e1 / e2 >= 1.7);                    // first-order-dominated refinement
}

TEST_CASE("viscous burgers matches the cole-hopf oracle on a coarse grid") {
    const double nu = 0.1 / std::numbers::pi;
    auto p = make_problem(nu);
    p.horizon = 0.5;
    p.h = h_sine(1, {{-1.0, {std::numbers::pi}, 0.0}});
    GridSpec grid(p.make_grid(128), TimeGrid(0.5, 512));
    auto b = build_brownian(3, 1, 0.5, 512);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    auto yh = fd_solve_forward(p, eta, grid);
    const auto prof = profile_sine(-1.0, std::numbers::pi);
    double worst = 0.0;
    for (std::size_t j = 0; j <= 512; j += 64) {
        for (std::size_t m = 0; m < 128; m += 4) {
            const double exact =
                cole_hopf_oracle_1d(nu, prof, grid.time.time(j), grid.space.coord(0, m));
            worst = std::max(worst, std::fabs(yh.at(j, m, 0) - exact));
        }
    }
    REQUIRE(worst <= 1.2e-2);  // coarse-grid version of the oracle comparison
    REQUIRE(grid.report.max_cfl_observed <= 0.5);
}

TEST_CASE("maximum principle: deterministic burgers does not amplify the sup norm") {
    auto p = make_problem(0.05);
    p.h = h_sine(1, {{0.9, {std::numbers::pi}, 0.4}});
    GridSpec grid(p.make_grid(64), TimeGrid(1.0, 256));
    auto b = build_brownian(5, 1, 1.0, 256);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    auto yh = fd_solve_forward(p, eta, grid);
    REQUIRE(yh.sup_norm() <= 0.9 + 1e-6);
}

TEST_CASE("cfl violation is refused with the required step") {
    auto p = make_problem(0.0);
    p.h = h_sine(1, {{2.0, {std::numbers::pi}, 0.0}});
    GridSpec grid(p.make_grid(64), TimeGrid(1.0, 16));  // dt far above the advective limit
    auto b = build_brownian(6, 1, 1.0, 16);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    REQUIRE_THROWS_AS(fd_solve_forward(p, eta, grid), CflError);
    try {
        GridSpec grid2(p.make_grid(64), TimeGrid(1.0, 16));
        fd_solve_forward(p, eta, grid2, {});
    } catch (const CflError& e) {
        REQUIRE(e.required_dt > 0.0);
        REQUIRE(e.required_dt < 1.0 / 16.0);
    }
}

TEST_CASE("grid spec rejects undersized grids and mismatched noise") {
    REQUIRE_THROWS_AS(GridSpec(SpatialGrid({{-1.0, 1.0, 4}}, BoundaryMode::periodic),
                               TimeGrid(1.0, 8)),
                      std::invalid_argument);
    auto p = make_problem(0.1);
    GridSpec grid(p.make_grid(16), TimeGrid(1.0, 32));
    auto b = build_brownian(1, 1, 1.0, 16);  // wrong time grid
    auto eta = synthesize_noise_field(p.g, b, p.make_grid(16));
    REQUIRE_THROWS_AS(fd_solve_forward(p, eta, grid), std::invalid_argument);
}

TEST_CASE("adaptedness of the scheme under truncated noise") {
    auto p = make_problem(0.08);
    p.h = h_sine(1, {{0.4, {std::numbers::pi}, 0.0}});
    std::vector<SineChannel> gch{{0.3, {std::numbers::pi}, 0.7}};
    p.g = g_sine(1, 1, gch);
    const std::size_t steps = 64;
    GridSpec grid(p.make_grid(16), TimeGrid(1.0, steps));
    auto b1 = build_brownian(12, 1, 1.0, steps);
    auto b2 = b1.resampled_after(steps / 2, 999);
    auto solve = [&](const BrownianPath& b) {
        GridSpec g2(p.make_grid(16), TimeGrid(1.0, steps));
        auto eta = synthesize_noise_field(p.g, b, g2.space);
        return fd_solve_forward(p, eta, g2);
    };
    const auto rep = adaptedness_check(solve, 0.5, b1, b2);
    REQUIRE(rep.pass);
    REQUIRE(rep.slices_compared == steps / 2 + 1);
}

TEST_CASE("solutions are shift-equivariant on periodic grids") {
    auto p = make_problem(0.1);
    p.h = h_sine(1, {{0.5, {std::numbers::pi}, 0.3}});
    std::vector<SineChannel> gch{{0.25, {std::numbers::pi}, 0.1}};
    p.g = g_sine(1, 1, gch);
    GridSpec grid(p.make_grid(32), TimeGrid(0.5, 128));
    auto b = build_brownian(31, 1, 0.5, 128);

    SECTION("zero data: discrepancy is exactly zero") {
        auto pz = make_problem(0.1);
        GridSpec gz(pz.make_grid(32), TimeGrid(0.5, 128));
        std::vector<double> s{0.5};
        REQUIRE(periodic_shift_check(pz, b, gz, s) == 0.0);
    }
    SECTION("full-period shift: exact identity") {
        std::vector<double> s{2.0};
        REQUIRE(periodic_shift_check(p, b, grid, s) == 0.0);
    }
    SECTION("quarter-period shift: discrepancy at rounding level") {
        std::vector<double> s{0.5};
        REQUIRE(periodic_shift_check(p, b, grid, s) <= 1e-12);
    }
    SECTION("off-node shifts are rejected") {
        std::vector<double> s{0.013};
        REQUIRE_THROWS_AS(periodic_shift_check(p, b, grid, s), std::invalid_argument);
    }
}

TEST_CASE("blow-up is reported with its onset time") {
    // inviscid with a steep profile and no CFL headroom: force a blow-up by
    // disabling viscosity and driving with an unstable self-amplifying force
    auto p = make_problem(0.0);
    p.h = h_sine(1, {{0.5, {std::numbers::pi}, 0.0}});
    p.f = f_linear_drag(1, -1e7);  // f = +1e7 y: overflows within the horizon
    GridSpec grid(p.make_grid(16), TimeGrid(1.0, 64));
    grid.max_cfl = 1e300;  // let it run into the overflow rather than refuse
    auto b = build_brownian(2, 1, 1.0, 64);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    FdOptions opt;
    opt.compensate_upwind_diffusion = false;
    try {
        fd_solve_forward(p, eta, grid, opt);
        FAIL("expected blow-up");
    } catch (const BlowUpError& e) {
        REQUIRE(e.time > 0.0);
        REQUIRE(e.time <= 1.0);
    }
}

TEST_CASE("box mode runs and keeps constant states constant") {
    BurgersProblem p = make_problem(0.1);
    p.boundary = BoundaryMode::box;
    p.h = h_constant(1, {0.35});
    GridSpec grid(p.make_grid(16), TimeGrid(0.5, 64));
    auto b = build_brownian(8, 1, 0.5, 64);
    auto eta = synthesize_noise_field(p.g, b, grid.space);
    auto yh = fd_solve_forward(p, eta, grid);
    // constant data with zero force: zero-gradient boundaries preserve it
    for (double v : yh.values) REQUIRE(v == Catch::Approx(0.35).margin(1e-12));
}
