#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sburgers/grid.hpp"
#include "sburgers/linalg.hpp"
#include "sburgers/multiindex.hpp"

namespace sburgers {

enum class BasisKind { grid_linear, poly };

struct BasisWarnings {
    int ridge_fallbacks = 0;
    int order_degrades = 0;
};

/// Spatial regression basis for the least-squares conditional expectations:
/// either the piecewise-multilinear hat functions of the grid nodes (sparse
/// rows, and the fitted coefficients are nodal values, so the fit doubles as
/// the feedback interpolant) or tensor Chebyshev polynomials graded by total
/// degree (so a leading sub-block is again a polynomial basis, which makes
/// order degradation a principal-subsystem solve).
class RegressionBasis {
public:
    RegressionBasis(BasisKind kind, const SpatialGrid& grid, int order)
        : kind_(kind), grid_(&grid), order_(order) {
        if (kind_ == BasisKind::grid_linear) {
            size_ = grid.total_nodes();
        } else {
            if (order_ < 0 || order_ > 15)
                throw std::invalid_argument("RegressionBasis: order must lie in [0, 15]");
            mis_ = MultiIndexSet(grid.dim(), order_);
            size_ = mis_.size();
        }
    }

    BasisKind kind() const { return kind_; }
    std::size_t size() const { return size_; }
    const SpatialGrid& grid() const { return *grid_; }

    /// Number of leading basis functions forming the degree-q sub-basis.
    std::size_t graded_prefix(int q) const {
        if (kind_ == BasisKind::grid_linear) return size_;
        std::size_t s = 0;
        for (std::size_t a = 0; a < mis_.size(); ++a)
            if (mis_.order_of(a) <= q) ++s;
        return s;
    }

    /// Sparse row of basis values at x.
    void eval(Point x, std::vector<std::pair<std::size_t, double>>& row) const {
        row.clear();
        if (kind_ == BasisKind::grid_linear) {
            grid_->for_each_corner(x, [&](std::size_t flat, double w) { row.emplace_back(flat, w); });
            return;
        }
        const std::size_t n = grid_->dim();
        // scaled coordinates in [-1,1] per axis (box) or angle-wrapped (periodic)
        double u[SpatialGrid::kMaxDim];
        for (std::size_t a = 0; a < n; ++a) {
            const auto& ax = grid_->axis(a);
            double v = 2.0 * (x[a] - ax.lo) / (ax.hi - ax.lo) - 1.0;
            if (grid_->periodic()) {
                v = std::fmod(v + 1.0, 2.0);
                if (v < 0.0) v += 2.0;
                v -= 1.0;
            } else {
                v = std::clamp(v, -1.0, 1.0);
            }
            u[a] = v;
        }
        // Chebyshev values per axis up to order_
        double cheb[SpatialGrid::kMaxDim][16];
        for (std::size_t a = 0; a < n; ++a) {
            cheb[a][0] = 1.0;
            if (order_ >= 1) cheb[a][1] = u[a];
            for (int k = 2; k <= order_; ++k)
                cheb[a][k] = 2.0 * u[a] * cheb[a][k - 1] - cheb[a][k - 2];
        }
        for (std::size_t b = 0; b < size_; ++b) {
            auto alpha = mis_.alpha(b);
            double v = 1.0;
            for (std::size_t a = 0; a < n; ++a) v *= cheb[a][alpha[a]];
            row.emplace_back(b, v);
        }
    }

private:
    BasisKind kind_;
    const SpatialGrid* grid_;
    int order_ = 0;
    MultiIndexSet mis_;
    std::size_t size_ = 0;
};

/// Normal-equation least squares for vector-valued targets over a fixed
/// basis. Accumulation order is the call order of add(), so results are
/// deterministic. solve() factors once; rank trouble first degrades the
/// polynomial order (graded principal block), then falls back to a tiny
/// ridge; a constant-only basis that still fails is an error.
class LeastSquaresFit {
public:
    LeastSquaresFit(const RegressionBasis& basis, std::size_t cols)
        : basis_(&basis), b_(basis.size()), cols_(cols) {
        ata_.assign(b_ * b_, 0.0);
        aty_.assign(b_ * cols_, 0.0);
        coef_.assign(b_ * cols_, 0.0);
    }

    void reset() {
        std::fill(ata_.begin(), ata_.end(), 0.0);
        std::fill(aty_.begin(), aty_.end(), 0.0);
        rows_ = 0;
        solved_ = false;
    }

    void add_row(const std::vector<std::pair<std::size_t, double>>& row,
                 std::span<const double> y) {
        for (const auto& [i, wi] : row) {
            for (const auto& [j, wj] : row)
                if (j <= i) ata_[i * b_ + j] += wi * wj;
            for (std::size_t c = 0; c < cols_; ++c) aty_[i * cols_ + c] += wi * y[c];
        }
        ++rows_;
    }

    void add(Point x, std::span<const double> y) {
        thread_local std::vector<std::pair<std::size_t, double>> row;
        basis_->eval(x, row);
        add_row(row, y);
    }

    std::size_t rows() const { return rows_; }

    void solve(BasisWarnings& warnings) {
        if (rows_ == 0) throw std::runtime_error("LeastSquaresFit: no rows accumulated");
        active_ = b_;
        if (try_solve(active_)) {
            solved_ = true;
            return;
        }
        if (basis_->kind() == BasisKind::poly) {
            for (int q = 15; q >= 0; --q) {
                const std::size_t nb = basis_->graded_prefix(q);
                if (nb >= active_ || nb == 0) continue;
                ++warnings.order_degrades;
                active_ = nb;
                if (try_solve(active_)) {
                    solved_ = true;
                    return;
                }
                if (nb == 1)
                    throw std::runtime_error(
                        "LeastSquaresFit: singular design matrix at order 0");
            }
        }
        // ridge fallback keeps the full basis
        active_ = b_;
        double dmax = 0.0;
        for (std::size_t i = 0; i < b_; ++i) dmax = std::max(dmax, ata_[i * b_ + i]);
        ++warnings.ridge_fallbacks;
        if (!try_solve(active_, 1e-10 * (dmax > 0 ? dmax : 1.0)))
            throw std::runtime_error("LeastSquaresFit: singular normal equations");
        solved_ = true;
    }

    void evaluate(Point x, std::span<double> out) const {
        thread_local std::vector<std::pair<std::size_t, double>> row;
        basis_->eval(x, row);
        evaluate_row(row, out);
    }

    void evaluate_row(const std::vector<std::pair<std::size_t, double>>& row,
                      std::span<double> out) const {
        for (std::size_t c = 0; c < cols_; ++c) out[c] = 0.0;
        for (const auto& [b, w] : row) {
            if (b >= active_) continue;
            const double* cb = coef_.data() + b * cols_;
            for (std::size_t c = 0; c < cols_; ++c) out[c] += w * cb[c];
        }
    }

    std::span<const double> coefficients() const { return coef_; }

private:
    bool try_solve(std::size_t nb, double ridge = 0.0) {
        // pack the leading nb x nb block (lower triangle) and factor
        factor_.assign(nb * nb, 0.0);
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = 0; j <= i; ++j) factor_[i * nb + j] = ata_[i * b_ + j];
        if (ridge > 0.0)
            for (std::size_t i = 0; i < nb; ++i) factor_[i * nb + i] += ridge;
        if (!cholesky_factor(factor_, nb)) return false;
        std::vector<double> rhs(nb);
        std::fill(coef_.begin(), coef_.end(), 0.0);
        for (std::size_t c = 0; c < cols_; ++c) {
            for (std::size_t i = 0; i < nb; ++i) rhs[i] = aty_[i * cols_ + c];
            cholesky_solve(factor_, nb, rhs);
            for (std::size_t i = 0; i < nb; ++i) coef_[i * cols_ + c] = rhs[i];
        }
        return true;
    }

    const RegressionBasis* basis_;
    std::size_t b_, cols_;
    std::size_t rows_ = 0;
    std::size_t active_ = 0;
    bool solved_ = false;
    std::vector<double> ata_, aty_, coef_, factor_;
};

}  // namespace sburgers
