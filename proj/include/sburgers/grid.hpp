#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sburgers {

using Point = std::span<const double>;

/// Uniform time grid on [0, horizon] with `steps` intervals (steps+1 slices).
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    }

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t slices() const { return steps_ + 1; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t j) const { return dt() * static_cast<double>(j); }

    bool operator==(const TimeGrid& o) const {
        return horizon_ == o.horizon_ && steps_ == o.steps_;
    }

private:
    double horizon_ = 1.0;
    std::size_t steps_ = 1;
};

enum class BoundaryMode { periodic, box };

struct AxisSpec {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t nodes = 8;
};

/// Uniform tensor-product spatial grid. In periodic mode the node at `hi` is
/// identified with the node at `lo` and is not stored; in box mode both
/// endpoints are nodes and fields extend constantly outside.
class SpatialGrid {
public:
    SpatialGrid() = default;
    SpatialGrid(std::vector<AxisSpec> axes, BoundaryMode mode)
        : axes_(std::move(axes)), mode_(mode) {
        if (axes_.empty()) throw std::invalid_argument("SpatialGrid: need at least one axis");
        total_ = 1;
        for (const auto& ax : axes_) {
            if (!(ax.hi > ax.lo)) throw std::invalid_argument("SpatialGrid: hi must exceed lo");
            if (ax.nodes < 2) throw std::invalid_argument("SpatialGrid: nodes must be >= 2");
            total_ *= ax.nodes;
        }
        spacing_.resize(axes_.size());
        for (std::size_t a = 0; a < axes_.size(); ++a) {
            const double len = axes_[a].hi - axes_[a].lo;
            spacing_[a] = periodic() ? len / static_cast<double>(axes_[a].nodes)
                                     : len / static_cast<double>(axes_[a].nodes - 1);
        }
    }

    std::size_t dim() const { return axes_.size(); }
    std::size_t nodes(std::size_t axis) const { return axes_[axis].nodes; }
    std::size_t total_nodes() const { return total_; }
    bool periodic() const { return mode_ == BoundaryMode::periodic; }
    BoundaryMode mode() const { return mode_; }
    double spacing(std::size_t axis) const { return spacing_[axis]; }
    double min_spacing() const {
        double h = spacing_[0];
        for (double s : spacing_) h = std::min(h, s);
        return h;
    }
    const AxisSpec& axis(std::size_t a) const { return axes_[a]; }
    double period(std::size_t a) const { return axes_[a].hi - axes_[a].lo; }

    double coord(std::size_t axis, std::size_t i) const {
        return axes_[axis].lo + spacing_[axis] * static_cast<double>(i);
    }

    void node_point(std::size_t flat, std::span<double> out) const {
        for (std::size_t a = 0; a < dim(); ++a) {
            out[a] = coord(a, flat % axes_[a].nodes);
            flat /= axes_[a].nodes;
        }
    }

    std::size_t flat_index(std::span<const std::size_t> idx) const {
        std::size_t f = 0;
        for (std::size_t a = dim(); a-- > 0;) f = f * axes_[a].nodes + idx[a];
        return f;
    }

    /// Index stride of axis `a` in a flat node index.
    std::size_t stride(std::size_t a) const {
        std::size_t s = 1;
        for (std::size_t b = 0; b < a; ++b) s *= axes_[b].nodes;
        return s;
    }

    /// Neighbor of `flat` along `axis` shifted by delta (wrapped or clamped).
    std::size_t neighbor(std::size_t flat, std::size_t axis, long delta) const {
        const std::size_t na = axes_[axis].nodes;
        const std::size_t st = stride(axis);
        const long i = static_cast<long>((flat / st) % na);
        long j = i + delta;
        if (periodic()) {
            j = ((j % static_cast<long>(na)) + static_cast<long>(na)) % static_cast<long>(na);
        } else {
            if (j < 0) j = 0;
            if (j >= static_cast<long>(na)) j = static_cast<long>(na) - 1;
        }
        return flat + (static_cast<std::size_t>(j) - static_cast<std::size_t>(i)) * st;
    }

    bool operator==(const SpatialGrid& o) const {
        if (mode_ != o.mode_ || axes_.size() != o.axes_.size()) return false;
        for (std::size_t a = 0; a < axes_.size(); ++a)
            if (axes_[a].lo != o.axes_[a].lo || axes_[a].hi != o.axes_[a].hi ||
                axes_[a].nodes != o.axes_[a].nodes)
                return false;
        return true;
    }

    /// Visit the multilinear cell corners of x with their weights:
    /// f(flat_node_index, weight). Periodic axes wrap; box axes clamp,
    /// i.e. constant extension outside. Weights sum to one.
    template <typename F>
    void for_each_corner(Point x, F&& f) const {
        const std::size_t n = dim();
        std::size_t base[kMaxDim];
        double frac[kMaxDim];
        locate(x, base, frac);
        const std::size_t corners = std::size_t{1} << n;
        for (std::size_t corner = 0; corner < corners; ++corner) {
            double w = 1.0;
            std::size_t flat = 0;
            for (std::size_t a = n; a-- > 0;) {
                const std::size_t na = axes_[a].nodes;
                const bool hi = (corner >> a) & 1u;
                w *= hi ? frac[a] : (1.0 - frac[a]);
                std::size_t ia = base[a];
                if (hi) {
                    ia += 1;
                    if (ia >= na) ia = periodic() ? 0 : na - 1;
                }
                flat = flat * na + ia;
            }
            if (w == 0.0) continue;
            f(flat, w);
        }
    }

    /// Multilinear interpolation of nodal data laid out [node*comp + c].
    void interpolate(const double* data, std::size_t comp, Point x,
                     std::span<double> out) const {
        for (std::size_t c = 0; c < comp; ++c) out[c] = 0.0;
        for_each_corner(x, [&](std::size_t flat, double w) {
            const double* v = data + flat * comp;
            for (std::size_t c = 0; c < comp; ++c) out[c] += w * v[c];
        });
    }

    static constexpr std::size_t kMaxDim = 6;

private:
    void locate(Point x, std::size_t* base, double* frac) const {
        for (std::size_t a = 0; a < dim(); ++a) {
            const std::size_t na = axes_[a].nodes;
            const double u = (x[a] - axes_[a].lo) / spacing_[a];
            if (periodic()) {
                const double fl = std::floor(u);
                long i = static_cast<long>(fl);
                frac[a] = u - fl;
                i = ((i % static_cast<long>(na)) + static_cast<long>(na)) % static_cast<long>(na);
                base[a] = static_cast<std::size_t>(i);
            } else {
                if (u <= 0.0) {
                    base[a] = 0;
                    frac[a] = 0.0;
                } else if (u >= static_cast<double>(na - 1)) {
                    base[a] = na - 2;
                    frac[a] = 1.0;
                } else {
                    const double fl = std::floor(u);
                    base[a] = static_cast<std::size_t>(fl);
                    if (base[a] > na - 2) base[a] = na - 2;
                    frac[a] = u - fl;
                }
            }
        }
    }

    std::vector<AxisSpec> axes_;
    BoundaryMode mode_ = BoundaryMode::periodic;
    std::vector<double> spacing_;
    std::size_t total_ = 0;
};

}  // namespace sburgers
