#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sburgers/brownian.hpp"
#include "sburgers/fields.hpp"
#include "sburgers/noise_field.hpp"

namespace sburgers {

struct HolderEstimate {
    double exponent = 0.0;
    double r_squared = 0.0;
    bool degenerate = false;
};

struct RateFit {
    double exponent = 0.0;
    double r_squared = 0.0;
};

/// Least-squares line through (xs, ys); returns (slope, R^2).
inline std::pair<double, double> fit_line(std::span<const double> xs,
                                          std::span<const double> ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    const double dn = static_cast<double>(n);
    const double vx = sxx - sx * sx / dn;
    const double vy = syy - sy * sy / dn;
    const double cxy = sxy - sx * sy / dn;
    if (vx <= 0.0) return {0.0, 0.0};
    const double slope = cxy / vx;
    const double r2 = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
    return {slope, r2};
}

namespace detail {

/// Max over all windows of `width+1` consecutive samples of (max - min),
/// via monotone deques (O(n) per call).
inline double sliding_sup_oscillation(std::span<const double> u, std::size_t width) {
    std::deque<std::size_t> maxq, minq;
    double osc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        while (!maxq.empty() && u[maxq.back()] <= u[i]) maxq.pop_back();
        maxq.push_back(i);
        while (!minq.empty() && u[minq.back()] >= u[i]) minq.pop_back();
        minq.push_back(i);
        if (i >= width) {
            if (maxq.front() + width < i) maxq.pop_front();
            if (minq.front() + width < i) minq.pop_front();
            osc = std::max(osc, u[maxq.front()] - u[minq.front()]);
        }
    }
    return osc;
}

}  // namespace detail

/// Discrete time-Hoelder exponent: regress log of the sup-oscillation over
/// windows of lag l against log l, l = 1..max_lag. The series is split into
/// disjoint segments whose per-segment sup-oscillations are combined by
/// geometric mean, which tames the heavy fluctuation of a single global sup
/// without changing what is measured; segments = 0 picks up to 8 segments of
/// at least 4*max_lag samples each.
inline HolderEstimate holder_exponent(std::span<const double> series, std::size_t max_lag,
                                      std::size_t segments = 0) {
    if (max_lag < 2) throw std::invalid_argument("holder_exponent: max_lag must be >= 2");
    if (series.size() < 4 * max_lag)
        throw std::invalid_argument("holder_exponent: series length must be >= 4*max_lag");
    if (segments == 0)
        segments = std::min<std::size_t>(8, series.size() / (4 * max_lag));
    segments = std::max<std::size_t>(1, segments);
    const std::size_t seg_len = series.size() / segments;

    std::vector<double> lx, ly;
    lx.reserve(max_lag);
    ly.reserve(max_lag);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double log_sum = 0.0;
        for (std::size_t k = 0; k < segments; ++k) {
            const std::size_t begin = k * seg_len;
            const std::size_t len = (k + 1 == segments) ? series.size() - begin : seg_len;
            const double osc =
                detail::sliding_sup_oscillation(series.subspan(begin, len), lag);
            if (osc <= 0.0) {
                HolderEstimate e;
                e.degenerate = true;
                return e;
            }
            log_sum += std::log(osc);
        }
        lx.push_back(std::log(static_cast<double>(lag)));
        ly.push_back(log_sum / static_cast<double>(segments));
    }
    HolderEstimate e;
    auto [slope, r2] = fit_line(lx, ly);
    e.exponent = slope;
    e.r_squared = r2;
    return e;
}

/// Grid C^k sup norm of a noise field: max over value and derivative channels
/// of order <= k.
inline double sup_norm_ck(const NoiseField& field, int k) {
    if (k < 0 || k > field.deriv_order())
        throw std::invalid_argument("sup_norm_ck: derivative channel missing for requested order");
    return field.ck_norm(k);
}

/// Grid C^k sup norm of a space-time field; k=1 needs the gradient channel.
inline double sup_norm_ck(const SpaceTimeField& field, int k) {
    if (k < 0 || k > 1) throw std::invalid_argument("sup_norm_ck: field carries orders 0..1 only");
    double m = 0.0;
    for (double v : field.values) m = std::max(m, std::fabs(v));
    if (k == 1) {
        if (!field.has_gradient())
            throw std::invalid_argument("sup_norm_ck: gradient channel missing");
        for (double v : field.gradient) m = std::max(m, std::fabs(v));
    }
    return m;
}

/// Log-log slope of error against scale. Pairs must be positive.
inline RateFit rate_fit(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 pairs");
    std::vector<double> lx, ly;
    for (const auto& [scale, err] : pairs) {
        if (!(scale > 0.0) || !(err > 0.0))
            throw std::invalid_argument("rate_fit: entries must be positive");
        lx.push_back(std::log(scale));
        ly.push_back(std::log(err));
    }
    auto [slope, r2] = fit_line(lx, ly);
    return {slope, r2};
}

struct AdaptednessReport {
    bool pass = false;
    double first_divergence_time = -1.0;  // -1 when no divergence up to t_split
    std::size_t slices_compared = 0;
};

/// Run a solver on two Brownian realizations that share increments on
/// [0, t_split] and differ after, and require bit-identical output fields on
/// [0, t_split]. The solver maps a BrownianPath to a SpaceTimeField on the
/// driver's grid.
inline AdaptednessReport adaptedness_check(
    const std::function<SpaceTimeField(const BrownianPath&)>& solve, double t_split,
    const BrownianPath& b1, const BrownianPath& b2) {
    if (!(b1.grid() == b2.grid()) || b1.dim() != b2.dim())
        throw std::invalid_argument("adaptedness_check: realizations live on different grids");
    const TimeGrid& tg = b1.grid();
    const double dt = tg.dt();
    const std::size_t split_step =
        static_cast<std::size_t>(std::min<double>(std::floor(t_split / dt + 1e-9),
                                                  static_cast<double>(tg.steps())));
    bool coupled = true;
    for (std::size_t j = 0; j < split_step && coupled; ++j)
        for (std::size_t k = 0; k < b1.dim(); ++k)
            if (b1.increment(j, k) != b2.increment(j, k)) coupled = false;
    if (!coupled)
        throw std::invalid_argument("adaptedness_check: realizations are not coupled on [0, t_split]");

    const SpaceTimeField u1 = solve(b1);
    const SpaceTimeField u2 = solve(b2);
    if (u1.values.size() != u2.values.size())
        throw std::invalid_argument("adaptedness_check: solver outputs differ in shape");

    AdaptednessReport rep;
    const std::size_t per = u1.space.total_nodes() * u1.comp;
    for (std::size_t j = 0; j < u1.time.slices(); ++j) {
        if (u1.time.time(j) > t_split + 1e-12) break;
        rep.slices_compared = j + 1;
        const double* a = u1.slice(j);
        const double* b = u2.slice(j);
        for (std::size_t p = 0; p < per; ++p) {
            if (a[p] != b[p]) {
                rep.pass = false;
                rep.first_divergence_time = u1.time.time(j);
                return rep;
            }
        }
    }
    rep.pass = true;
    return rep;
}

}  // namespace sburgers
