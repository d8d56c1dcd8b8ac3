#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sburgers/brownian.hpp"
#include "sburgers/coefficients.hpp"
#include "sburgers/grid.hpp"
#include "sburgers/multiindex.hpp"

namespace sburgers {

/// The space-time noise field eta(t,x) = int_0^t g(s,x) dB_s sampled at grid
/// level, together with its spatial derivative channels. Channel a holds the
/// Ito sum of d^alpha(a) g, so the derivative channels are exact derivatives
/// of the value channel up to the quadrature of the common Brownian sum.
/// Immutable after construction.
class NoiseField {
public:
    NoiseField(TimeGrid tg, SpatialGrid sg, std::size_t comp, int deriv_order,
               std::vector<std::vector<double>> channels, double holder_beta = 0.5)
        : tg_(tg), sg_(std::move(sg)), comp_(comp), mis_(sg_.dim(), deriv_order),
          chan_(std::move(channels)), beta_(holder_beta) {
        if (chan_.size() != mis_.size())
            throw std::invalid_argument("NoiseField: channel count mismatch");
        const std::size_t expect = tg_.slices() * sg_.total_nodes() * comp_;
        for (const auto& c : chan_)
            if (c.size() != expect)
                throw std::invalid_argument("NoiseField: channel buffer size mismatch");
    }

    const TimeGrid& time_grid() const { return tg_; }
    const SpatialGrid& space_grid() const { return sg_; }
    std::size_t components() const { return comp_; }
    int deriv_order() const { return mis_.max_order(); }
    double holder_beta() const { return beta_; }
    const MultiIndexSet& multi_indices() const { return mis_; }
    std::size_t channel_count() const { return chan_.size(); }
    std::span<const double> channel(std::size_t a) const { return chan_[a]; }

    const double* slice(std::size_t a, std::size_t j) const {
        return chan_[a].data() + j * sg_.total_nodes() * comp_;
    }

    /// eta_i(t_j, node m), channel a.
    double at(std::size_t a, std::size_t j, std::size_t m, std::size_t i) const {
        return chan_[a][(j * sg_.total_nodes() + m) * comp_ + i];
    }

    void eval_channel(std::size_t a, std::size_t j, Point x, std::span<double> out) const {
        sg_.interpolate(slice(a, j), comp_, x, out);
    }

    /// eta(t_j, x).
    void eval_value(std::size_t j, Point x, std::span<double> out) const {
        eval_channel(0, j, x, out);
    }

    /// grad[i*n + k] = d_k eta_i (t_j, x). Requires order >= 1.
    void eval_grad(std::size_t j, Point x, std::span<double> grad) const {
        require_order(1, "gradient");
        const std::size_t n = sg_.dim();
        thread_local std::vector<double> tmp;
        tmp.resize(comp_);
        for (std::size_t k = 0; k < n; ++k) {
            eval_channel(first_[k], j, x, tmp);
            for (std::size_t i = 0; i < comp_; ++i) grad[i * n + k] = tmp[i];
        }
    }

    /// lap[i] = (Delta eta)_i (t_j, x). Requires order >= 2.
    void eval_laplacian(std::size_t j, Point x, std::span<double> lap) const {
        require_order(2, "laplacian");
        const std::size_t n = sg_.dim();
        thread_local std::vector<double> tmp;
        tmp.resize(comp_);
        for (std::size_t i = 0; i < comp_; ++i) lap[i] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            eval_channel(second_[k * n + k], j, x, tmp);
            for (std::size_t i = 0; i < comp_; ++i) lap[i] += tmp[i];
        }
    }

    /// hess[(i*n + k)*n + l] = d_k d_l eta_i. Requires order >= 2.
    void eval_hessian(std::size_t j, Point x, std::span<double> hess) const {
        require_order(2, "hessian");
        const std::size_t n = sg_.dim();
        thread_local std::vector<double> tmp;
        tmp.resize(comp_);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) {
                eval_channel(second_[k * n + l], j, x, tmp);
                for (std::size_t i = 0; i < comp_; ++i) hess[(i * n + k) * n + l] = tmp[i];
            }
    }

    /// gl[i*n + k] = d_k (Delta eta)_i. Requires order >= 3.
    void eval_grad_laplacian(std::size_t j, Point x, std::span<double> gl) const {
        require_order(3, "gradient of laplacian");
        const std::size_t n = sg_.dim();
        thread_local std::vector<double> tmp;
        tmp.resize(comp_);
        for (std::size_t i = 0; i < comp_ * n; ++i) gl[i] = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) {
                eval_channel(third_[k * n + l], j, x, tmp);
                for (std::size_t i = 0; i < comp_; ++i) gl[i * n + k] += tmp[i];
            }
    }

    /// Max over nodes, components and channels of order <= k at time slice j.
    double ck_norm_at(std::size_t j, int k) const {
        if (k > mis_.max_order())
            throw std::invalid_argument("NoiseField: derivative channel of requested order missing");
        double m = 0.0;
        for (std::size_t a = 0; a < chan_.size(); ++a) {
            if (mis_.order_of(a) > k) continue;
            const double* s = slice(a, j);
            const std::size_t cnt = sg_.total_nodes() * comp_;
            for (std::size_t q = 0; q < cnt; ++q) m = std::max(m, std::fabs(s[q]));
        }
        return m;
    }

    double ck_norm(int k) const {
        double m = 0.0;
        for (std::size_t j = 0; j < tg_.slices(); ++j) m = std::max(m, ck_norm_at(j, k));
        return m;
    }

    void finalize_lookup() {
        const std::size_t n = sg_.dim();
        first_.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            first_[k] = mis_.max_order() >= 1 ? mis_.first(k) : 0;
        if (mis_.max_order() >= 2) {
            second_.resize(n * n);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t l = 0; l < n; ++l) second_[k * n + l] = mis_.second(k, l);
        }
        if (mis_.max_order() >= 3) {
            // third_[k*n + l] = channel of d_k d_l d_l
            third_.resize(n * n);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t l = 0; l < n; ++l) third_[k * n + l] = mis_.third(k, l, l);
        }
    }

private:
    void require_order(int k, const char* what) const {
        if (mis_.max_order() < k)
            throw std::invalid_argument(std::string("NoiseField: ") + what +
                                        " requested but derivative channels are missing");
    }

    TimeGrid tg_;
    SpatialGrid sg_;
    std::size_t comp_ = 1;
    MultiIndexSet mis_;
    std::vector<std::vector<double>> chan_;
    double beta_ = 0.5;
    std::vector<std::size_t> first_, second_, third_;
};

/// Factory keeping construction + lookup table setup in one place.
inline NoiseField make_noise_field(TimeGrid tg, SpatialGrid sg, std::size_t comp,
                                   int deriv_order, std::vector<std::vector<double>> channels,
                                   double holder_beta = 0.5) {
    NoiseField f(tg, std::move(sg), comp, deriv_order, std::move(channels), holder_beta);
    f.finalize_lookup();
    return f;
}

/// Left-point Ito sums of g against the Brownian increments, one channel per
/// spatial multi-index of g. eta(0,.) = 0; the slice at t_j only reads
/// increments with index < j.
inline NoiseField synthesize_noise_field(const DiffusionSpec& g, const BrownianPath& brownian,
                                         const SpatialGrid& sgrid, int deriv_order = 4,
                                         double holder_beta = 0.5) {
    if (g.field_dim != sgrid.dim())
        throw std::invalid_argument("synthesize_noise_field: g field dimension does not match grid");
    if (g.noise_dim != brownian.dim())
        throw std::invalid_argument("synthesize_noise_field: g noise dimension does not match driver");
    const TimeGrid& tg = brownian.grid();
    const std::size_t n = sgrid.dim();
    const std::size_t d = g.noise_dim;
    const std::size_t total = sgrid.total_nodes();
    MultiIndexSet mis(n, deriv_order);

    std::vector<std::vector<double>> chan(mis.size());
    for (auto& c : chan) c.assign(tg.slices() * total * n, 0.0);

    std::vector<double> gv(d * n);
    std::vector<double> x(n);
    for (std::size_t a = 0; a < mis.size(); ++a) {
        auto alpha = mis.alpha(a);
        auto& buf = chan[a];
        for (std::size_t j = 0; j < tg.steps(); ++j) {
            const double t = tg.time(j);
            const double* prev = buf.data() + j * total * n;
            double* next = buf.data() + (j + 1) * total * n;
            for (std::size_t m = 0; m < total; ++m) {
                sgrid.node_point(m, x);
                g.deriv(alpha, t, x, gv);
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = prev[m * n + i];
                    for (std::size_t k = 0; k < d; ++k) {
                        if (!std::isfinite(gv[k * n + i]))
                            throw std::invalid_argument(
                                "synthesize_noise_field: g is not finite on the grid");
                        acc += gv[k * n + i] * brownian.increment(j, k);
                    }
                    next[m * n + i] = acc;
                }
            }
        }
    }
    return make_noise_field(tg, sgrid, n, deriv_order, std::move(chan), holder_beta);
}

/// Time mollification by the standard bump kernel with radius 1/m, applied to
/// every channel. The field is extended by its first slice below t=0 and by
/// its last slice above t=T. Discrete trapezoid weights are normalized to sum
/// to one, so constants are preserved and the sup norm never grows.
inline NoiseField mollify_in_time(const NoiseField& eta, int m) {
    if (m < 1) throw std::invalid_argument("mollify_in_time: m must be >= 1");
    const TimeGrid& tg = eta.time_grid();
    const double eps = 1.0 / static_cast<double>(m);
    const double dt = tg.dt();
    const long radius = static_cast<long>(std::floor(eps / dt));
    const std::size_t per_slice = eta.space_grid().total_nodes() * eta.components();

    std::vector<double> w(2 * radius + 1, 0.0);
    double wsum = 0.0;
    for (long l = -radius; l <= radius; ++l) {
        const double s = static_cast<double>(l) * dt / eps;
        double v = 0.0;
        if (std::fabs(s) < 1.0) v = std::exp(-1.0 / (1.0 - s * s));
        if (std::labs(l) == radius) v *= 0.5;  // trapezoid ends
        w[l + radius] = v;
        wsum += v;
    }
    for (double& v : w) v /= wsum;
    const long rad = static_cast<long>(w.size() / 2);

    std::vector<std::vector<double>> chan(eta.channel_count());
    for (std::size_t a = 0; a < eta.channel_count(); ++a) {
        chan[a].assign(tg.slices() * per_slice, 0.0);
        for (std::size_t j = 0; j < tg.slices(); ++j) {
            double* out = chan[a].data() + j * per_slice;
            for (long l = -rad; l <= rad; ++l) {
                long q = static_cast<long>(j) - l;
                if (q < 0) q = 0;
                if (q > static_cast<long>(tg.steps())) q = static_cast<long>(tg.steps());
                const double* src = eta.slice(a, static_cast<std::size_t>(q));
                const double wl = w[l + rad];
                for (std::size_t p = 0; p < per_slice; ++p) out[p] += wl * src[p];
            }
        }
    }
    return make_noise_field(tg, eta.space_grid(), eta.components(), eta.deriv_order(),
                            std::move(chan), eta.holder_beta());
}

/// Grid surrogate of T_N = T /\ inf{t : ||eta(t,.)||_{C^4} > N}: the last grid
/// time whose running C^4 max stays <= N, floored at the first positive grid
/// time (the stopping time is never zero) and capped at T.
inline double stopping_time_T_N(const NoiseField& eta, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("stopping_time_T_N: N must be positive");
    const TimeGrid& tg = eta.time_grid();
    const int k = 4;
    std::size_t last_ok = 0;
    for (std::size_t j = 0; j <= tg.steps(); ++j) {
        if (eta.ck_norm_at(j, k) > threshold) break;
        last_ok = j;
    }
    const std::size_t j_stop = std::max<std::size_t>(last_ok, 1);
    return tg.time(std::min(j_stop, tg.steps()));
}

/// eta_N(t,x) = eta(t /\ t_stop, x): identical up to t_stop, frozen after.
inline NoiseField truncate_noise(const NoiseField& eta, double t_stop) {
    const TimeGrid& tg = eta.time_grid();
    const double dt = tg.dt();
    const double pos = t_stop / dt;
    const double rounded = std::round(pos);
    if (std::fabs(pos - rounded) > 1e-9 || t_stop < 0.0 || t_stop > tg.horizon() + 1e-12)
        throw std::invalid_argument("truncate_noise: t_stop must be a grid time");
    const std::size_t j_stop = static_cast<std::size_t>(rounded);
    const std::size_t per_slice = eta.space_grid().total_nodes() * eta.components();

    std::vector<std::vector<double>> chan(eta.channel_count());
    for (std::size_t a = 0; a < eta.channel_count(); ++a) {
        chan[a].assign(tg.slices() * per_slice, 0.0);
        for (std::size_t j = 0; j < tg.slices(); ++j) {
            const double* src = eta.slice(a, std::min(j, j_stop));
            double* dst = chan[a].data() + j * per_slice;
            for (std::size_t p = 0; p < per_slice; ++p) dst[p] = src[p];
        }
    }
    return make_noise_field(tg, eta.space_grid(), eta.components(), eta.deriv_order(),
                            std::move(chan), eta.holder_beta());
}

/// Restrict a noise field to the first `steps_keep` grid steps (a prefix in
/// time, so the result only depends on driver increments before the cut).
inline NoiseField restrict_noise(const NoiseField& eta, std::size_t steps_keep) {
    const TimeGrid& tg = eta.time_grid();
    if (steps_keep < 1 || steps_keep > tg.steps())
        throw std::invalid_argument("restrict_noise: steps_keep out of range");
    TimeGrid sub(tg.dt() * static_cast<double>(steps_keep), steps_keep);
    const std::size_t per_slice = eta.space_grid().total_nodes() * eta.components();
    std::vector<std::vector<double>> chan(eta.channel_count());
    for (std::size_t a = 0; a < eta.channel_count(); ++a)
        chan[a].assign(eta.channel(a).begin(),
                       eta.channel(a).begin() + (steps_keep + 1) * per_slice);
    return make_noise_field(sub, eta.space_grid(), eta.components(), eta.deriv_order(),
                            std::move(chan), eta.holder_beta());
}

/// Reverse a noise field in time: eta_bar(t_j, .) = eta(t_{steps-j}, .).
inline NoiseField time_reverse(const NoiseField& eta) {
    const TimeGrid& tg = eta.time_grid();
    const std::size_t per_slice = eta.space_grid().total_nodes() * eta.components();
    std::vector<std::vector<double>> chan(eta.channel_count());
    for (std::size_t a = 0; a < eta.channel_count(); ++a) {
        chan[a].assign(tg.slices() * per_slice, 0.0);
        for (std::size_t j = 0; j < tg.slices(); ++j) {
            const double* src = eta.slice(a, tg.steps() - j);
            double* dst = chan[a].data() + j * per_slice;
            for (std::size_t p = 0; p < per_slice; ++p) dst[p] = src[p];
        }
    }
    return make_noise_field(tg, eta.space_grid(), eta.components(), eta.deriv_order(),
                            std::move(chan), eta.holder_beta());
}

}  // namespace sburgers
