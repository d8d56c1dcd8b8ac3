#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sburgers/coefficients.hpp"
#include "sburgers/noise_field.hpp"
#include "sburgers/problem.hpp"

namespace sburgers {

// ---------------------------------------------------------------------------
// Smooth cutoff zeta_M(y) = xi(|y|) y: identity inside the ball of radius M,
// zero outside radius M+1, smooth monotone radial decay in between built from
// the exp(-1/s) bump.
// ---------------------------------------------------------------------------

namespace detail {
inline double bump_sigma(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double bump_sigma_d(double s) {
    return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0;
}
}  // namespace detail

/// Radial profile: 1 for u <= 0, 0 for u >= 1, smooth in between.
inline double cutoff_profile(double u) {
    const double a = detail::bump_sigma(1.0 - u);
    const double b = detail::bump_sigma(u);
    if (a + b == 0.0) return u <= 0.0 ? 1.0 : 0.0;
    return a / (a + b);
}

inline double cutoff_profile_d(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double a = detail::bump_sigma(1.0 - u);
    const double b = detail::bump_sigma(u);
    const double ad = -detail::bump_sigma_d(1.0 - u);
    const double bd = detail::bump_sigma_d(u);
    const double denom = (a + b) * (a + b);
    return (ad * (a + b) - a * (ad + bd)) / denom;
}

/// zeta_M(y).
inline void cutoff_map(Point y, double M, std::span<double> out) {
    if (!(M > 0.0)) throw std::invalid_argument("cutoff_map: M must be positive");
    double r2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) r2 += y[i] * y[i];
    const double r = std::sqrt(r2);
    const double xi = cutoff_profile(r - M);
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = xi * y[i];
}

/// Jacobian of zeta_M: xi I + (xi'(r-M)/r) y y^T. out[i*n + j] = d zeta_i / d y_j.
inline void cutoff_jacobian(Point y, double M, std::span<double> out) {
    if (!(M > 0.0)) throw std::invalid_argument("cutoff_jacobian: M must be positive");
    const std::size_t n = y.size();
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) r2 += y[i] * y[i];
    const double r = std::sqrt(r2);
    const double xi = cutoff_profile(r - M);
    const double dxi = r > 0.0 ? cutoff_profile_d(r - M) / r : 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = (i == j ? xi : 0.0) + dxi * y[i] * y[j];
}

// ---------------------------------------------------------------------------
// The transformed force of the substituted equation,
//   F(t,x,yh) = f(t,x, yh + eta) + nu Lap eta - (yh + eta, grad) eta,
// with the cutoff variant replacing the advected yh by zeta_M(yh). First
// derivatives come from the chain rule and the analytic channels of eta.
// ---------------------------------------------------------------------------

class TransformedForce {
public:
    TransformedForce(ForceSpec f, double nu, std::shared_ptr<const NoiseField> eta,
                     bool reversed_time = false, std::optional<double> cutoff = std::nullopt)
        : f_(std::move(f)), nu_(nu), eta_(std::move(eta)), reversed_(reversed_time),
          cutoff_(cutoff) {
        if (!eta_) throw std::invalid_argument("TransformedForce: missing noise field");
        if (eta_->deriv_order() < 2)
            throw std::invalid_argument(
                "TransformedForce: noise field must carry derivative channels through order 2");
        n_ = eta_->components();
        if (f_.dim != n_) throw std::invalid_argument("TransformedForce: dimension mismatch");
    }

    std::size_t dim() const { return n_; }
    double viscosity() const { return nu_; }
    const NoiseField& eta() const { return *eta_; }
    std::shared_ptr<const NoiseField> eta_ptr() const { return eta_; }
    const ForceSpec& force() const { return f_; }
    bool reversed() const { return reversed_; }
    std::optional<double> cutoff_level() const { return cutoff_; }

    double force_time(std::size_t j) const {
        const double t = eta_->time_grid().time(j);
        return reversed_ ? eta_->time_grid().horizon() - t : t;
    }

    /// F(t_j, x, yhat).
    void value(std::size_t j, Point x, Point yhat, std::span<double> out) const {
        Workspace& w = ws();
        eta_->eval_value(j, x, w.eta);
        eta_->eval_grad(j, x, w.grad);
        eta_->eval_laplacian(j, x, w.lap);
        value_with(j, x, yhat, w, out);
    }

    /// Fast path for grid nodes: channels read without interpolation.
    void value_at_node(std::size_t j, std::size_t m, Point x, Point yhat,
                       std::span<double> out) const {
        Workspace& w = ws();
        const auto& mis = eta_->multi_indices();
        for (std::size_t i = 0; i < n_; ++i) {
            w.eta[i] = eta_->at(0, j, m, i);
            w.lap[i] = 0.0;
        }
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t ck = mis.first(k);
            const std::size_t ckk = mis.second(k, k);
            for (std::size_t i = 0; i < n_; ++i) {
                w.grad[i * n_ + k] = eta_->at(ck, j, m, i);
                w.lap[i] += eta_->at(ckk, j, m, i);
            }
        }
        value_with(j, x, yhat, w, out);
    }

    /// d1[i*n + k] = d F_i / d x_k at (t_j, x, yhat). Needs order-3 channels.
    void d1(std::size_t j, Point x, Point yhat, std::span<double> out) const {
        if (eta_->deriv_order() < 3)
            throw std::invalid_argument("TransformedForce::d1 requires order-3 noise channels");
        Workspace& w = ws();
        eta_->eval_value(j, x, w.eta);
        eta_->eval_grad(j, x, w.grad);
        eta_->eval_hessian(j, x, w.hess);
        eta_->eval_grad_laplacian(j, x, w.gradlap);
        for (std::size_t i = 0; i < n_; ++i) w.ytot[i] = yhat[i] + w.eta[i];
        const double tf = force_time(j);
        f_.dx(tf, x, std::span<const double>(w.ytot.data(), n_), w.fx);
        f_.dy(tf, x, std::span<const double>(w.ytot.data(), n_), w.fy);
        advected(yhat, w);  // fills w.adv = zeta_M(yhat) or yhat
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t k = 0; k < n_; ++k) {
                double v = w.fx[i * n_ + k] + nu_ * w.gradlap[i * n_ + k];
                for (std::size_t m2 = 0; m2 < n_; ++m2)
                    v += w.fy[i * n_ + m2] * w.grad[m2 * n_ + k];
                for (std::size_t jj = 0; jj < n_; ++jj)
                    v -= w.grad[jj * n_ + k] * w.grad[i * n_ + jj] +
                         (w.adv[jj] + w.eta[jj]) * w.hess[(i * n_ + jj) * n_ + k];
                out[i * n_ + k] = v;
            }
        }
    }

    /// d2[i*n + m] = d F_i / d yhat_m at (t_j, x, yhat).
    void d2(std::size_t j, Point x, Point yhat, std::span<double> out) const {
        Workspace& w = ws();
        eta_->eval_value(j, x, w.eta);
        eta_->eval_grad(j, x, w.grad);
        for (std::size_t i = 0; i < n_; ++i) w.ytot[i] = yhat[i] + w.eta[i];
        const double tf = force_time(j);
        f_.dy(tf, x, std::span<const double>(w.ytot.data(), n_), w.fy);
        if (cutoff_) {
            cutoff_jacobian(yhat, *cutoff_, w.zjac);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t m2 = 0; m2 < n_; ++m2) {
                    double v = w.fy[i * n_ + m2];
                    for (std::size_t jj = 0; jj < n_; ++jj)
                        v -= w.zjac[jj * n_ + m2] * w.grad[i * n_ + jj];
                    out[i * n_ + m2] = v;
                }
        } else {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t m2 = 0; m2 < n_; ++m2)
                    out[i * n_ + m2] = w.fy[i * n_ + m2] - w.grad[i * n_ + m2];
        }
    }

private:
    struct Workspace {
        std::vector<double> eta, lap, ytot, adv, fx, fy, fval;
        std::vector<double> grad, hess, gradlap, zjac;
        void resize(std::size_t n) {
            eta.resize(n);
            lap.resize(n);
            ytot.resize(n);
            adv.resize(n);
            fval.resize(n);
            fx.resize(n * n);
            fy.resize(n * n);
            grad.resize(n * n);
            zjac.resize(n * n);
            gradlap.resize(n * n);
            hess.resize(n * n * n);
        }
    };

    Workspace& ws() const {
        thread_local Workspace w;
        w.resize(n_);
        return w;
    }

    void advected(Point yhat, Workspace& w) const {
        if (cutoff_)
            cutoff_map(yhat, *cutoff_, w.adv);
        else
            for (std::size_t i = 0; i < n_; ++i) w.adv[i] = yhat[i];
    }

    void value_with(std::size_t j, Point x, Point yhat, Workspace& w,
                    std::span<double> out) const {
        for (std::size_t i = 0; i < n_; ++i) w.ytot[i] = yhat[i] + w.eta[i];
        f_.value(force_time(j), x, std::span<const double>(w.ytot.data(), n_), w.fval);
        advected(yhat, w);
        for (std::size_t i = 0; i < n_; ++i) {
            double v = w.fval[i] + nu_ * w.lap[i];
            for (std::size_t jj = 0; jj < n_; ++jj)
                v -= (w.adv[jj] + w.eta[jj]) * w.grad[i * n_ + jj];
            out[i] = v;
        }
    }

    ForceSpec f_;
    double nu_ = 0.0;
    std::shared_ptr<const NoiseField> eta_;
    bool reversed_ = false;
    std::optional<double> cutoff_;
    std::size_t n_ = 1;
};

/// F of the substituted equation for a problem and a noise realization.
inline TransformedForce transformed_force(const BurgersProblem& p,
                                          std::shared_ptr<const NoiseField> eta) {
    return TransformedForce(p.f, p.viscosity, std::move(eta), false, std::nullopt);
}

/// F^M: same force with the advected argument passed through zeta_M.
inline TransformedForce cutoff_force(const TransformedForce& F, double M) {
    if (!(M > 0.0)) throw std::invalid_argument("cutoff_force: M must be positive");
    return TransformedForce(F.force(), F.viscosity(), F.eta_ptr(), F.reversed(), M);
}

/// F_bar(t,x,y) = F(T-t,x,y): reversed-time force over the reversed field.
inline TransformedForce time_reverse(const TransformedForce& F) {
    auto eta_rev = std::make_shared<NoiseField>(time_reverse(F.eta()));
    return TransformedForce(F.force(), F.viscosity(), std::move(eta_rev), !F.reversed(),
                            F.cutoff_level());
}

}  // namespace sburgers
