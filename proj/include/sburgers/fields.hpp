#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sburgers/grid.hpp"
#include "sburgers/noise_field.hpp"

namespace sburgers {

/// A vector-valued field sampled on (time grid) x (spatial grid), with an
/// optional gradient channel [((j*total + m)*comp + i)*dim + k] = d_k u_i.
struct SpaceTimeField {
    TimeGrid time;
    SpatialGrid space;
    std::size_t comp = 1;
    std::vector<double> values;
    std::vector<double> gradient;  // empty unless populated

    SpaceTimeField() = default;
    SpaceTimeField(TimeGrid tg, SpatialGrid sg, std::size_t c)
        : time(tg), space(std::move(sg)), comp(c),
          values(time.slices() * space.total_nodes() * comp, 0.0) {}

    bool has_gradient() const { return !gradient.empty(); }

    double& at(std::size_t j, std::size_t m, std::size_t i) {
        return values[(j * space.total_nodes() + m) * comp + i];
    }
    double at(std::size_t j, std::size_t m, std::size_t i) const {
        return values[(j * space.total_nodes() + m) * comp + i];
    }

    double* slice(std::size_t j) { return values.data() + j * space.total_nodes() * comp; }
    const double* slice(std::size_t j) const {
        return values.data() + j * space.total_nodes() * comp;
    }

    void eval(std::size_t j, Point x, std::span<double> out) const {
        space.interpolate(slice(j), comp, x, out);
    }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::fabs(v));
        return m;
    }

    void alloc_gradient() {
        gradient.assign(values.size() * space.dim(), 0.0);
    }

    double& grad_at(std::size_t j, std::size_t m, std::size_t i, std::size_t k) {
        return gradient[((j * space.total_nodes() + m) * comp + i) * space.dim() + k];
    }
    double grad_at(std::size_t j, std::size_t m, std::size_t i, std::size_t k) const {
        return gradient[((j * space.total_nodes() + m) * comp + i) * space.dim() + k];
    }
};

inline void require_matching_grids(const SpaceTimeField& f, const NoiseField& eta) {
    if (!(f.time == eta.time_grid()) || !(f.space == eta.space_grid()) ||
        f.comp != eta.components())
        throw std::invalid_argument("field/noise grid mismatch");
}

/// yhat = y - eta, nodewise on matching grids.
inline SpaceTimeField substitute(const SpaceTimeField& y, const NoiseField& eta) {
    require_matching_grids(y, eta);
    SpaceTimeField out = y;
    const std::size_t per = y.space.total_nodes() * y.comp;
    for (std::size_t j = 0; j < y.time.slices(); ++j) {
        const double* e = eta.slice(0, j);
        double* v = out.slice(j);
        for (std::size_t p = 0; p < per; ++p) v[p] -= e[p];
    }
    return out;
}

/// y = yhat + eta, inverse of substitute.
inline SpaceTimeField reconstruct(const SpaceTimeField& yhat, const NoiseField& eta) {
    require_matching_grids(yhat, eta);
    SpaceTimeField out = yhat;
    const std::size_t per = yhat.space.total_nodes() * yhat.comp;
    for (std::size_t j = 0; j < yhat.time.slices(); ++j) {
        const double* e = eta.slice(0, j);
        double* v = out.slice(j);
        for (std::size_t p = 0; p < per; ++p) v[p] += e[p];
    }
    return out;
}

/// u_bar(t_j, .) = u(t_{steps-j}, .); applying it twice is the identity.
inline SpaceTimeField time_reverse(const SpaceTimeField& u) {
    SpaceTimeField out = u;
    const std::size_t per = u.space.total_nodes() * u.comp;
    for (std::size_t j = 0; j < u.time.slices(); ++j) {
        const double* src = u.slice(u.time.steps() - j);
        double* dst = out.slice(j);
        for (std::size_t p = 0; p < per; ++p) dst[p] = src[p];
        if (u.has_gradient()) {
            const std::size_t gper = per * u.space.dim();
            const double* gs = u.gradient.data() + (u.time.steps() - j) * gper;
            double* gd = out.gradient.data() + j * gper;
            for (std::size_t p = 0; p < gper; ++p) gd[p] = gs[p];
        }
    }
    return out;
}

/// Max over shared grid of |a - b|.
inline double sup_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
    if (a.values.size() != b.values.size())
        throw std::invalid_argument("sup_distance: field size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::fabs(a.values[i] - b.values[i]));
    return m;
}

inline double mean_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
    if (a.values.size() != b.values.size())
        throw std::invalid_argument("mean_distance: field size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::fabs(a.values[i] - b.values[i]);
    return a.values.empty() ? 0.0 : s / static_cast<double>(a.values.size());
}

}  // namespace sburgers
