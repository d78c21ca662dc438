#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace rankcf {

// Runs fn(0..n-1) on up to `threads` workers. Results must go into
// caller-owned slots indexed by i so the outcome does not depend on the
// thread count. The first exception is rethrown on the calling thread.
inline void parallel_for(Eigen::Index n, int threads,
                         const std::function<void(Eigen::Index)>& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (Eigen::Index i = 0; i < n; ++i) fn(i);
        return;
    }
    int workers = static_cast<int>(std::min<Eigen::Index>(threads, n));
    std::atomic<Eigen::Index> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                Eigen::Index i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace rankcf
