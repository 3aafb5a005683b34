#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace convsl {

/// Number of workers parallel_for will actually start.
[[nodiscard]] inline unsigned worker_count(std::size_t count, unsigned threads) noexcept {
    if (count == 0) return 1;
    return std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
}

/// Run body(i, worker) for i in [0, count) on up to `threads` workers, where
/// worker < worker_count(count, threads) identifies the calling thread.
///
/// Work is handed out through an atomic counter; each index writes its own
/// output slot, so results do not depend on scheduling. The first exception
/// thrown by any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for_workers(std::size_t count, unsigned threads, Body&& body) {
    if (count == 0) return;
    const unsigned workers = worker_count(count, threads);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i, 0u);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&](unsigned w) {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i, w);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    parallel_for_workers(count, threads, [&](std::size_t i, unsigned) { body(i); });
}

}  // namespace convsl
