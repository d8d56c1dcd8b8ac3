#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sburgers {

/// Tridiagonal solve (Thomas algorithm), Dirichlet-free interior form.
/// lower has n-1 entries (row i couples to i-1), diag n, upper n-1.
/// Overwrites rhs with the solution.
inline void thomas_solve(std::span<const double> lower,
                         std::span<const double> diag,
                         std::span<const double> upper,
                         std::span<double> rhs,
                         std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    scratch.resize(n);
    double piv = diag[0];
    if (piv == 0.0) throw std::runtime_error("thomas_solve: zero pivot");
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = upper[i - 1] / piv;
        piv = diag[i] - lower[i - 1] * scratch[i];
        if (piv == 0.0) throw std::runtime_error("thomas_solve: zero pivot");
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

/// Cyclic tridiagonal solve via Sherman-Morrison. diag/lower/upper all have
/// n entries; lower[i] couples row i to i-1 (lower[0] is the wrap term),
/// upper[i] couples row i to i+1 (upper[n-1] is the wrap term).
inline void cyclic_thomas_solve(std::span<const double> lower,
                                std::span<const double> diag,
                                std::span<const double> upper,
                                std::span<double> rhs,
                                std::vector<double>& work) {
    const std::size_t n = diag.size();
    if (n < 3) throw std::invalid_argument("cyclic_thomas_solve: n must be >= 3");
    // Rank-one correction A = A' + u v^T with u = (gamma, 0..0, beta)^T and
    // v = (1, 0..0, alpha/gamma)^T, gamma = -diag[0].
    const double alpha = lower[0];     // A(0, n-1), wrap of row 0
    const double beta = upper[n - 1];  // A(n-1, 0), wrap of row n-1
    const double gamma = -diag[0];

    work.assign(2 * n, 0.0);
    std::span<double> d(work.data(), n);      // modified diagonal
    std::span<double> u(work.data() + n, n);  // correction rhs
    std::span<double> x(rhs.data(), n);
    std::vector<double> scratch;

    for (std::size_t i = 0; i < n; ++i) d[i] = diag[i];
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    u[0] = gamma;
    u[n - 1] = beta;

    std::span<const double> lo(lower.data() + 1, n - 1);
    std::span<const double> up(upper.data(), n - 1);
    thomas_solve(lo, d, up, x, scratch);
    thomas_solve(lo, d, up, u, scratch);

    const double num = x[0] + alpha * x[n - 1] / gamma;
    const double den = 1.0 + u[0] + alpha * u[n - 1] / gamma;
    if (den == 0.0) throw std::runtime_error("cyclic_thomas_solve: singular correction");
    const double fact = num / den;
    for (std::size_t i = 0; i < n; ++i) x[i] -= fact * u[i];
}

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// (row-major, lower triangle used). Returns false if a pivot fails.
inline bool cholesky_factor(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double s = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= a[j * n + k] * a[j * n + k];
        if (!(s > 0.0)) return false;
        const double ljj = std::sqrt(s);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double t = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) t -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = t / ljj;
        }
    }
    return true;
}

/// Solve L L^T x = b given the Cholesky factor from cholesky_factor.
inline void cholesky_solve(const std::vector<double>& l, std::size_t n,
                           std::span<double> b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * b[k];
        b[i] = s / l[i * n + i];
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix together with the first
/// component of each (normalized) eigenvector. QL with implicit shifts,
/// rotations applied to a single accumulation row. diag has n entries,
/// off has n-1 (off[i] couples i and i+1).
inline void symmetric_tridiagonal_eigen_first_row(std::vector<double> diag,
                                                  std::vector<double> off,
                                                  std::vector<double>& eigenvalues,
                                                  std::vector<double>& first_row) {
    const std::size_t n = diag.size();
    off.resize(n, 0.0);
    first_row.assign(n, 0.0);
    if (n == 0) { eigenvalues.clear(); return; }
    first_row[0] = 1.0;

    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::fabs(diag[m]) + std::fabs(diag[m + 1]);
                if (std::fabs(off[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 60)
                    throw std::runtime_error("tridiagonal eigen: too many iterations");
                double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
                double r = std::hypot(g, 1.0);
                g = diag[m] - diag[l] + off[l] / (g + (g >= 0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * off[i];
                    const double b = c * off[i];
                    r = std::hypot(f, g);
                    off[i + 1] = r;
                    if (r == 0.0) {
                        diag[i + 1] -= p;
                        off[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = diag[i + 1] - p;
                    r = (diag[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    diag[i + 1] = g + p;
                    g = c * r - b;
                    // accumulate the rotation in the tracked row
                    f = first_row[i + 1];
                    first_row[i + 1] = s * first_row[i] + c * f;
                    first_row[i] = c * first_row[i] - s * f;
                }
                if (r == 0.0 && m - l > 1) continue;
                diag[l] -= p;
                off[l] = g;
                off[m] = 0.0;
            }
        } while (m != l);
    }
    eigenvalues = std::move(diag);
}

}  // namespace sburgers
