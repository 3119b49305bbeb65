#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace lores {

// Worker cap: LORESNMT_THREADS if set, else min(4, hardware).
inline int worker_threads() {
    if (const char* env = std::getenv("LORESNMT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    const int cap = hw == 0 ? 1 : static_cast<int>(hw);
    return cap < 4 ? cap : 4;
}

// Runs fn(shard, begin, end) over T contiguous shards of [0, n). Shard
// boundaries depend only on (n, T), so results are reproducible for a
// fixed thread count; callers that need bit-exact output merge per-shard
// results in shard order.
template <class F>
void parallel_shards(int n, int threads, F&& fn) {
    if (n <= 0) return;
    if (threads > n) threads = n;
    if (threads <= 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const int base = n / threads;
    const int extra = n % threads;
    int begin = 0;
    for (int t = 0; t < threads; ++t) {
        const int len = base + (t < extra ? 1 : 0);
        const int end = begin + len;
        pool.emplace_back([&fn, t, begin, end] { fn(t, begin, end); });
        begin = end;
    }
    for (auto& th : pool) th.join();
}

}  // namespace lores
