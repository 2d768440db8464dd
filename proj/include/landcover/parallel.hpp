#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace landcover {

inline constexpr const char* kThreadsEnv = "LANDCOVER_THREADS";

/// Worker count: $LANDCOVER_THREADS if set to a positive integer, otherwise
/// the hardware concurrency.
inline unsigned thread_count() {
    static const unsigned n = [] {
        if (const char* env = std::getenv(kThreadsEnv)) {
            try {
                const long v = std::stol(env);
                if (v > 0) return static_cast<unsigned>(v);
            } catch (...) {
            }
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }();
    return n;
}

/// Runs fn(i) for i in [0, n). Tasks must write disjoint outputs; the result
/// is then independent of how tasks are scheduled onto threads.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

} // namespace landcover
