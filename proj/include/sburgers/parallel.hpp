#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace sburgers {

/// Static block partition of [0, count) across at most `threads` workers.
/// fn(begin, end) must only write to slots owned by its own range, so the
/// result is identical for any thread count.
template <typename F>
void parallel_for_blocks(std::size_t count, int threads, F&& fn) {
    if (threads <= 1 || count < 2048) {
        fn(std::size_t{0}, count);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sburgers
