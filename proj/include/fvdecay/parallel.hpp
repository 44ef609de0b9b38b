#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fvdecay {

inline unsigned default_jobs() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Run body(i) for i in [0, n) on up to `jobs` threads. Work items must
/// not share mutable state; the first exception thrown is rethrown on the
/// calling thread after all workers join.
inline void parallel_for(std::size_t n, unsigned jobs,
                         const std::function<void(std::size_t)> &body) {
    if (jobs == 0)
        jobs = default_jobs();
    if (jobs == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err)
                    err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned nt = static_cast<unsigned>(
        std::min<std::size_t>(jobs, n));
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back(worker);
    for (auto &th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace fvdecay
