// Minimal chunked parallel_for. Results must be written to per-index slots
// so reductions stay deterministic regardless of thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace qarch {

inline int& worker_count() {
    static int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
}

inline void set_worker_count(int n) { worker_count() = std::max(1, n); }

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace qarch
