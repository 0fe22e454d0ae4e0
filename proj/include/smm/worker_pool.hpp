#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace smm {

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs task(i) for i in [0, count) on up to `workers` threads. Tasks write
// their result into slot i of caller-owned storage, so the merged output is
// ordered by index whatever the completion order. The exception of the
// lowest failing index is rethrown after all workers have joined.
template <typename Task>
void parallel_for(std::size_t count, unsigned workers, Task&& task) {
    if (count == 0) return;
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));

    std::vector<std::exception_ptr> failures(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                task(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto loop = [&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

} // namespace smm
