#pragma once

// Minimal fork-join loop. The worker count comes from ISOJET_THREADS
// (default: hardware concurrency). Results are written by index, so the
// output does not depend on scheduling.

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isojet {

/// Worker count from the ISOJET_THREADS environment variable, at least 1.
int thread_count();

namespace detail {
// Set on worker threads so nested loops run serially instead of oversubscribing.
inline thread_local bool in_parallel_region = false;
}  // namespace detail

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers =
        detail::in_parallel_region ? 1 : std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        const bool outer = detail::in_parallel_region;
        detail::in_parallel_region = true;
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        detail::in_parallel_region = outer;
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace isojet
