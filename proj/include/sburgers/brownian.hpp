#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sburgers/grid.hpp"
#include "sburgers/rng.hpp"

namespace sburgers {

/// A sampled d-dimensional Brownian driver on a uniform time grid.
/// Stores the increments; path values are prefix sums (value at t=0 is zero).
class BrownianPath {
public:
    BrownianPath(TimeGrid grid, std::size_t dim, std::uint64_t seed,
                 std::vector<double> increments)
        : grid_(grid), dim_(dim), seed_(seed), inc_(std::move(increments)) {
        if (inc_.size() != grid_.steps() * dim_)
            throw std::invalid_argument("BrownianPath: increment buffer size mismatch");
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }

    /// Increment over [t_j, t_{j+1}), component k.
    double increment(std::size_t j, std::size_t k) const { return inc_[j * dim_ + k]; }
    std::span<const double> increments() const { return inc_; }

    /// Path value at grid slice j (prefix sum of increments).
    void value_at(std::size_t j, std::span<double> out) const {
        for (std::size_t k = 0; k < dim_; ++k) out[k] = 0.0;
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t k = 0; k < dim_; ++k) out[k] += inc_[i * dim_ + k];
    }

    /// Coupled copy: identical increments up to (excluding) step `split_step`,
    /// freshly drawn increments from there on.
    BrownianPath resampled_after(std::size_t split_step, std::uint64_t new_seed) const {
        std::vector<double> inc = inc_;
        NormalRng rng(new_seed);
        const double s = std::sqrt(grid_.dt());
        for (std::size_t j = split_step; j < grid_.steps(); ++j)
            for (std::size_t k = 0; k < dim_; ++k) inc[j * dim_ + k] = s * rng();
        return BrownianPath(grid_, dim_, new_seed, std::move(inc));
    }

private:
    TimeGrid grid_;
    std::size_t dim_ = 1;
    std::uint64_t seed_ = 0;
    std::vector<double> inc_;
};

/// Draw a Brownian driver. Deterministic in (seed, dim, grid).
inline BrownianPath build_brownian(std::uint64_t seed, std::size_t dim, double horizon,
                                   std::size_t steps) {
    if (!(horizon > 0.0)) throw std::invalid_argument("build_brownian: horizon must be positive");
    if (steps < 1) throw std::invalid_argument("build_brownian: steps must be >= 1");
    if (dim < 1) throw std::invalid_argument("build_brownian: dim must be >= 1");
    TimeGrid grid(horizon, steps);
    std::vector<double> inc(steps * dim);
    NormalRng rng(seed);
    const double s = std::sqrt(grid.dt());
    for (double& v : inc) v = s * rng();
    return BrownianPath(grid, dim, seed, std::move(inc));
}

}  // namespace sburgers
