#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace hja::detail {

/* Runs body(0..n_tasks-1) on up to n_threads workers.  Tasks must be
 * independent and must not throw; result ordering is the caller's job. */
inline void parallel_for(int n_tasks, int n_threads, const std::function<void(int)>& body) {
    n_threads = std::max(1, std::min(n_threads, n_tasks));
    if (n_threads <= 1) {
        for (int t = 0; t < n_tasks; ++t) body(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        workers.emplace_back([&] {
            for (int t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) body(t);
        });
    }
    for (auto& worker : workers) worker.join();
}

}  // namespace hja::detail
