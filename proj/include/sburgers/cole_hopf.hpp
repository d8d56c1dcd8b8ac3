#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sburgers/linalg.hpp"

namespace sburgers {

struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // include exp(-u^2); sum = sqrt(pi)
};

/// Gauss-Hermite nodes/weights by Golub-Welsch on the Jacobi matrix
/// (off-diagonal sqrt(i/2)); cached per order.
inline const GaussHermiteRule& gauss_hermite(std::size_t order) {
    static std::map<std::size_t, GaussHermiteRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    std::vector<double> diag(order, 0.0), off(order - 1);
    for (std::size_t i = 1; i < order; ++i) off[i - 1] = std::sqrt(0.5 * static_cast<double>(i));
    std::vector<double> lambda, row;
    symmetric_tridiagonal_eigen_first_row(diag, off, lambda, row);

    GaussHermiteRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    std::vector<std::size_t> perm(order);
    for (std::size_t i = 0; i < order; ++i) perm[i] = i;
    std::sort(perm.begin(), perm.end(),
              [&lambda](std::size_t a, std::size_t b) { return lambda[a] < lambda[b]; });
    const double mu0 = std::sqrt(std::numbers::pi);
    for (std::size_t i = 0; i < order; ++i) {
        rule.nodes[i] = lambda[perm[i]];
        rule.weights[i] = mu0 * row[perm[i]] * row[perm[i]];
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

/// A 1D initial profile together with its antiderivative H (H' = h, H(0)=0),
/// which the Hopf solution formula integrates in the exponent.
struct Profile1d {
    std::function<double(double)> h;
    std::function<double(double)> antiderivative;
};

inline Profile1d profile_zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }};
}

inline Profile1d profile_constant(double c) {
    return {[c](double) { return c; }, [c](double xi) { return c * xi; }};
}

/// h(x) = a sin(k x + phi) + c.
inline Profile1d profile_sine(double a, double k, double phi = 0.0, double c = 0.0) {
    return {[=](double x) { return a * std::sin(k * x + phi) + c; },
            [=](double xi) { return -a * (std::cos(k * xi + phi) - std::cos(phi)) / k + c * xi; }};
}

/// Exact (quadrature-converged) solution of the deterministic 1D viscous
/// Burgers equation via the Hopf formula
///   y(t,x) = sqrt(4 nu / t) * <u K> / <K>,  K = exp(-H(x - sqrt(4 nu t) u)/(2 nu)),
/// evaluated by Gauss-Hermite quadrature with the order doubled until two
/// successive values differ by less than tol.
inline double cole_hopf_oracle_1d(double nu, const Profile1d& profile, double t, double x,
                                  double tol = 1e-8, std::size_t max_order = 2048) {
    if (!(nu > 0.0)) throw std::invalid_argument("cole_hopf_oracle_1d: nu must be positive");
    if (t < 0.0) throw std::invalid_argument("cole_hopf_oracle_1d: t must be nonnegative");
    if (t < 1e-14) return profile.h(x);

    const double s = std::sqrt(4.0 * nu * t);
    auto evaluate = [&](std::size_t order) {
        const auto& rule = gauss_hermite(order);
        double emax = -1e300;
        std::vector<double> expo(order);
        for (std::size_t i = 0; i < order; ++i) {
            const double xi = x - s * rule.nodes[i];
            expo[i] = -profile.antiderivative(xi) / (2.0 * nu);
            emax = std::max(emax, expo[i]);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < order; ++i) {
            const double w = rule.weights[i] * std::exp(expo[i] - emax);
            num += w * rule.nodes[i];
            den += w;
        }
        return std::sqrt(4.0 * nu / t) * num / den;
    };

    double prev = evaluate(32);
    for (std::size_t order = 64; order <= max_order; order *= 2) {
        const double cur = evaluate(order);
        if (std::fabs(cur - prev) < tol) return cur;
        prev = cur;
    }
    throw std::runtime_error("cole_hopf_oracle_1d: quadrature did not converge at max order");
}

}  // namespace sburgers
