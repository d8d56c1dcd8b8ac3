#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "sburgers/grid.hpp"

namespace sburgers {

/// Diffusion coefficient g of the noise term. `deriv` evaluates an arbitrary
/// spatial derivative (multi-index alpha, |alpha| <= 4 for the presets) of
/// every entry; layout out[k*n + i] = d^alpha g_{k,i}, k the noise column,
/// i the field component. Closed-form derivatives are part of the contract.
struct DiffusionSpec {
    std::size_t field_dim = 1;  // n
    std::size_t noise_dim = 1;  // d
    enum class Support { unspecified, compact, periodic };
    Support support = Support::unspecified;
    std::function<void(std::span<const int>, double, Point, std::span<double>)> deriv;

    void value(double t, Point x, std::span<double> out) const {
        static thread_local std::vector<int> zero;
        zero.assign(field_dim, 0);
        deriv(zero, t, x, out);
    }
};

/// Initial condition h with gradient and Hessian.
/// gradient layout: [i*n + j] = d_j h_i; hessian: [(i*n + j)*n + k] = d_j d_k h_i.
struct InitialCondition {
    std::size_t dim = 1;
    std::function<void(Point, std::span<double>)> value;
    std::function<void(Point, std::span<double>)> gradient;
    std::function<void(Point, std::span<double>)> hessian;
};

/// Force f(t,x,y) with first derivatives and declared growth constant:
/// |f| <= L(1+|y|) and Lipschitz constant L in y.
/// dx layout: [i*n + j] = d_{x_j} f_i; dy: [i*n + j] = d_{y_j} f_i.
struct ForceSpec {
    std::size_t dim = 1;
    double growth_L = 0.0;
    std::function<void(double, Point, Point, std::span<double>)> value;
    std::function<void(double, Point, Point, std::span<double>)> dx;
    std::function<void(double, Point, Point, std::span<double>)> dy;
};

// ---------------------------------------------------------------------------
// Presets. Trigonometric families keep every spatial derivative in closed
// form: d^alpha sin(k.x + phi) = (prod k_a^{alpha_a}) sin(k.x + phi + |alpha| pi/2).
// ---------------------------------------------------------------------------

inline DiffusionSpec g_zero(std::size_t n, std::size_t d) {
    DiffusionSpec g;
    g.field_dim = n;
    g.noise_dim = d;
    g.support = DiffusionSpec::Support::compact;
    g.deriv = [n, d](std::span<const int>, double, Point, std::span<double> out) {
        for (std::size_t i = 0; i < n * d; ++i) out[i] = 0.0;
    };
    return g;
}

/// g constant in time and space: matrix[k*n + i]. All spatial derivatives vanish.
inline DiffusionSpec g_constant(std::size_t n, std::size_t d, std::vector<double> matrix) {
    if (matrix.size() != n * d) throw std::invalid_argument("g_constant: matrix size must be d*n");
    DiffusionSpec g;
    g.field_dim = n;
    g.noise_dim = d;
    g.deriv = [n, d, m = std::move(matrix)](std::span<const int> alpha, double, Point,
                                            std::span<double> out) {
        int order = 0;
        for (int a : alpha) order += a;
        if (order == 0)
            for (std::size_t i = 0; i < n * d; ++i) out[i] = m[i];
        else
            for (std::size_t i = 0; i < n * d; ++i) out[i] = 0.0;
    };
    return g;
}

struct SineChannel {
    double amp = 0.0;
    std::vector<double> wave;  // k vector, length n
    double phase = 0.0;
};

/// g_{k,i}(t,x) = amp sin(wave.x + phase) * cos(omega t); channels indexed
/// [k*n + i]. omega = 0 gives a time-constant integrand.
inline DiffusionSpec g_sine(std::size_t n, std::size_t d, std::vector<SineChannel> channels,
                            double omega = 0.0) {
    if (channels.size() != n * d) throw std::invalid_argument("g_sine: need d*n channels");
    for (const auto& c : channels)
        if (c.wave.size() != n) throw std::invalid_argument("g_sine: wave vector length mismatch");
    DiffusionSpec g;
    g.field_dim = n;
    g.noise_dim = d;
    g.support = DiffusionSpec::Support::periodic;
    g.deriv = [n, d, ch = std::move(channels), omega](std::span<const int> alpha, double t,
                                                      Point x, std::span<double> out) {
        const double tmod = (omega == 0.0) ? 1.0 : std::cos(omega * t);
        int order = 0;
        for (int a : alpha) order += a;
        const double shift = 0.5 * std::numbers::pi * static_cast<double>(order);
        for (std::size_t e = 0; e < n * d; ++e) {
            const auto& c = ch[e];
            double kpow = 1.0;
            double arg = c.phase + shift;
            for (std::size_t a = 0; a < n; ++a) {
                arg += c.wave[a] * x[a];
                for (int r = 0; r < alpha[a]; ++r) kpow *= c.wave[a];
            }
            out[e] = c.amp * kpow * std::sin(arg) * tmod;
        }
    };
    return g;
}

inline InitialCondition h_zero(std::size_t n) {
    InitialCondition h;
    h.dim = n;
    h.value = [n](Point, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
    };
    h.gradient = [n](Point, std::span<double> out) {
        for (std::size_t i = 0; i < n * n; ++i) out[i] = 0.0;
    };
    h.hessian = [n](Point, std::span<double> out) {
        for (std::size_t i = 0; i < n * n * n; ++i) out[i] = 0.0;
    };
    return h;
}

inline InitialCondition h_constant(std::size_t n, std::vector<double> c) {
    if (c.size() != n) throw std::invalid_argument("h_constant: need n values");
    InitialCondition h = h_zero(n);
    h.value = [n, c = std::move(c)](Point, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = c[i];
    };
    return h;
}

/// h_i(x) = amp_i sin(wave_i.x + phase_i) + offset_i.
inline InitialCondition h_sine(std::size_t n, std::vector<SineChannel> channels,
                               std::vector<double> offset = {}) {
    if (channels.size() != n) throw std::invalid_argument("h_sine: need n channels");
    if (offset.empty()) offset.assign(n, 0.0);
    if (offset.size() != n) throw std::invalid_argument("h_sine: offset length mismatch");
    for (const auto& c : channels)
        if (c.wave.size() != n) throw std::invalid_argument("h_sine: wave vector length mismatch");
    InitialCondition h;
    h.dim = n;
    auto arg_of = [n](const SineChannel& c, Point x) {
        double arg = c.phase;
        for (std::size_t a = 0; a < n; ++a) arg += c.wave[a] * x[a];
        return arg;
    };
    h.value = [n, channels, offset, arg_of](Point x, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = channels[i].amp * std::sin(arg_of(channels[i], x)) + offset[i];
    };
    h.gradient = [n, channels, arg_of](Point x, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
            const double c = channels[i].amp * std::cos(arg_of(channels[i], x));
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] = c * channels[i].wave[j];
        }
    };
    h.hessian = [n, channels, arg_of](Point x, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = -channels[i].amp * std::sin(arg_of(channels[i], x));
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    out[(i * n + j) * n + k] = s * channels[i].wave[j] * channels[i].wave[k];
        }
    };
    return h;
}

inline ForceSpec f_zero(std::size_t n) {
    ForceSpec f;
    f.dim = n;
    f.growth_L = 0.0;
    f.value = [n](double, Point, Point, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
    };
    f.dx = [n](double, Point, Point, std::span<double> out) {
        for (std::size_t i = 0; i < n * n; ++i) out[i] = 0.0;
    };
    f.dy = f.dx;
    return f;
}

/// f(t,x,y) = -lambda y. Growth and Lipschitz constant both lambda.
inline ForceSpec f_linear_drag(std::size_t n, double lambda) {
    ForceSpec f = f_zero(n);
    f.growth_L = std::fabs(lambda);
    f.value = [n, lambda](double, Point, Point y, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = -lambda * y[i];
    };
    f.dy = [n, lambda](double, Point, Point, std::span<double> out) {
        for (std::size_t i = 0; i < n * n; ++i) out[i] = 0.0;
        for (std::size_t i = 0; i < n; ++i) out[i * n + i] = -lambda;
    };
    return f;
}

/// Deterministic forcing f_i(t,x) = amp_i sin(wave_i.x + phase_i) cos(omega t).
inline ForceSpec f_sine(std::size_t n, std::vector<SineChannel> channels, double omega = 0.0) {
    if (channels.size() != n) throw std::invalid_argument("f_sine: need n channels");
    for (const auto& c : channels)
        if (c.wave.size() != n) throw std::invalid_argument("f_sine: wave vector length mismatch");
    ForceSpec f = f_zero(n);
    double amax = 0.0;
    for (const auto& c : channels) amax = std::max(amax, std::fabs(c.amp));
    f.growth_L = amax;
    auto arg_of = [n](const SineChannel& c, Point x) {
        double arg = c.phase;
        for (std::size_t a = 0; a < n; ++a) arg += c.wave[a] * x[a];
        return arg;
    };
    f.value = [n, channels, omega, arg_of](double t, Point x, Point, std::span<double> out) {
        const double tmod = (omega == 0.0) ? 1.0 : std::cos(omega * t);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = channels[i].amp * std::sin(arg_of(channels[i], x)) * tmod;
    };
    f.dx = [n, channels, omega, arg_of](double t, Point x, Point, std::span<double> out) {
        const double tmod = (omega == 0.0) ? 1.0 : std::cos(omega * t);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = channels[i].amp * std::cos(arg_of(channels[i], x)) * tmod;
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] = c * channels[i].wave[j];
        }
    };
    return f;
}

}  // namespace sburgers
