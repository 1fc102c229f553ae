#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cbop {

/// Runs body(i) for i in [0, n) on up to `threads` workers, each taking a
/// contiguous chunk. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace cbop
