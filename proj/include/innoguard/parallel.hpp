#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace innoguard {

/// Worker count for seed sweeps: INNOGUARD_THREADS if set, otherwise the
/// hardware concurrency (at least 1).
inline unsigned sweep_threads() {
    if (const char* env = std::getenv("INNOGUARD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Run fn(i) for i in [0, count) across the sweep pool. Each index owns its
/// output slot, so results are deterministic regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned nthreads = std::min<std::size_t>(sweep_threads(), count ? count : 1);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace innoguard
