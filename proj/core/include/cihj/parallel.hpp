#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace cihj {

/// Runs fn(block_index, begin, end) over a block decomposition of
/// [0, total). Blocks are contiguous and ordered, so per-block results can
/// be merged deterministically regardless of the thread count.
template <typename Fn>
void parallel_blocks(std::int64_t total, int threads, Fn&& fn) {
    if (threads <= 1 || total < 2) {
        fn(0, std::int64_t{0}, total);
        return;
    }
    const int blocks = static_cast<int>(std::min<std::int64_t>(threads, total));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(blocks));
    const std::int64_t chunk = (total + blocks - 1) / blocks;
    for (int b = 0; b < blocks; ++b) {
        const std::int64_t begin = b * chunk;
        const std::int64_t end = std::min(total, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, b, begin, end] { fn(b, begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace cihj
