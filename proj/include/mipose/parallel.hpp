#pragma once

// Deterministic fork-join helper: items are processed in disjoint index
// ranges, so as long as the worker writes only to its own output slots the
// result is independent of thread count and scheduling.

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace mipose {

/// Run fn(i) for i in [0, count) across `workers` threads (<= 0 selects the
/// hardware concurrency). The first worker exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (count == 0) return;
    std::size_t n_threads = workers > 0
                                ? static_cast<std::size_t>(workers)
                                : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                // Interleaved assignment balances uneven per-item cost.
                for (std::size_t i = t; i < count; i += n_threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace mipose
