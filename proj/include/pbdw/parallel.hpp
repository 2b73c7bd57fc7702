// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pbdw {

/// Process-wide worker count used by parallel_for (1 = run inline).
inline std::atomic<unsigned>& thread_count()
{
    static std::atomic<unsigned> count{1};
    return count;
}

/// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
/// write results into per-index slots and reduce sequentially afterwards.
template <typename Body>
void parallel_for(std::size_t n, Body&& body)
{
    const unsigned workers = std::min<std::size_t>(std::max(1u, thread_count().load()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace pbdw
