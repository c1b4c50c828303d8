#pragma once

// Replica-parallel task pool. Tasks are indexed; results land in
// caller-owned slots, so the aggregation order is fixed and output is
// deterministic regardless of the thread schedule.

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fluctlab {

inline void parallel_for(std::size_t n_tasks, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads < 1) threads = 1;
    if (threads == 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int spawn = std::min<int>(threads, static_cast<int>(n_tasks));
    pool.reserve(static_cast<std::size_t>(spawn));
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace fluctlab
