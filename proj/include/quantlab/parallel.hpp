#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace quantlab {

/// Runs fn(chunk) for chunk in [0, num_chunks) on up to `threads` workers.
/// Chunks are claimed dynamically; callers keep results deterministic by
/// writing each chunk's output to its own slot. The first exception thrown
/// by any chunk is rethrown after all workers finish.
template <class Fn>
void parallel_for_chunks(std::size_t num_chunks, int threads, Fn&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(num_chunks, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t c = 0; c < num_chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= num_chunks) return;
            try {
                fn(c);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(num_chunks);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace quantlab
