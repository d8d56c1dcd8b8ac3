#pragma once

#include <cstdint>
#include <random>

namespace sburgers {

/// splitmix64 step; used to derive independent per-path seeds from one root
/// seed so that path order and thread count never change the draws.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 0x51ED2701u));
}

class NormalRng {
public:
    explicit NormalRng(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return dist_(engine_); }

    void fill(double* out, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) out[i] = dist_(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace sburgers
