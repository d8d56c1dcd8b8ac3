#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sburgers/coefficients.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/rng.hpp"

namespace sburgers {

/// The full problem record for
///   y_t = nu Lap y - (y,grad)y + f(t,x,y),  y(0,.) = h,  + noise g dB.
struct BurgersProblem {
    double viscosity = 0.1;        // nu >= 0
    double horizon = 1.0;          // T
    std::size_t dim = 1;           // n
    std::size_t noise_dim = 1;     // d
    InitialCondition h;
    ForceSpec f;
    DiffusionSpec g;
    double holder_beta = 0.5;      // target Hoelder exponent of the data
    std::vector<AxisSpec> domain;  // one entry per spatial axis
    BoundaryMode boundary = BoundaryMode::periodic;

    SpatialGrid make_grid(std::size_t nodes_per_axis) const {
        std::vector<AxisSpec> axes = domain;
        for (auto& a : axes) a.nodes = nodes_per_axis;
        return SpatialGrid(std::move(axes), boundary);
    }

    void validate() const {
        if (viscosity < 0.0) throw std::invalid_argument("BurgersProblem: viscosity must be >= 0");
        if (!(horizon > 0.0)) throw std::invalid_argument("BurgersProblem: horizon must be positive");
        if (dim < 1 || noise_dim < 1) throw std::invalid_argument("BurgersProblem: dimensions must be >= 1");
        if (domain.size() != dim) throw std::invalid_argument("BurgersProblem: domain must have one axis per dimension");
        if (!(holder_beta > 0.0 && holder_beta < 1.0))
            throw std::invalid_argument("BurgersProblem: beta must lie in (0,1)");
        if (h.dim != dim || f.dim != dim || g.field_dim != dim || g.noise_dim != noise_dim)
            throw std::invalid_argument("BurgersProblem: coefficient dimensions inconsistent");
    }
};

/// Spot-check the declared growth/Lipschitz constant of f on random probes:
/// |f(t,x,y)| <= L(1+|y|) and |f(t,x,y)-f(t,x,y')| <= L|y-y'|.
/// Returns the worst observed ratio over the declared bound (<= 1 passes).
inline double probe_force_growth(const BurgersProblem& p, std::uint64_t seed = 7,
                                 std::size_t probes = 200) {
    const std::size_t n = p.dim;
    NormalRng rng(seed);
    std::vector<double> x(n), y(n), y2(n), fv(n), fv2(n);
    double worst = 0.0;
    const double L = p.f.growth_L;
    for (std::size_t q = 0; q < probes; ++q) {
        const double t = 0.5 * (1.0 + std::tanh(rng())) * p.horizon;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = p.domain[i].lo + 0.5 * (1.0 + std::tanh(rng())) * (p.domain[i].hi - p.domain[i].lo);
            y[i] = 2.0 * rng();
            y2[i] = y[i] + 0.5 * rng();
        }
        p.f.value(t, x, y, fv);
        p.f.value(t, x, y2, fv2);
        double fn = 0.0, yn = 0.0, dn = 0.0, dy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            fn += fv[i] * fv[i];
            yn += y[i] * y[i];
            dn += (fv[i] - fv2[i]) * (fv[i] - fv2[i]);
            dy += (y[i] - y2[i]) * (y[i] - y2[i]);
        }
        fn = std::sqrt(fn);
        yn = std::sqrt(yn);
        dn = std::sqrt(dn);
        dy = std::sqrt(dy);
        const double growth_bound = L * (1.0 + yn);
        if (growth_bound > 0.0) worst = std::max(worst, fn / growth_bound);
        else if (fn > 0.0) worst = std::max(worst, 1e9);
        if (dy > 0.0 && L > 0.0) worst = std::max(worst, dn / (L * dy));
        else if (dn > 1e-14) worst = std::max(worst, 1e9);
    }
    return worst;
}

}  // namespace sburgers
