#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace kge {

/// Splits [0, n) into `threads` contiguous chunks and calls fn(worker, begin, end)
/// for each. The partition depends only on n and threads, so per-worker results
/// merged in worker order are reproducible.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t w = 1; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    fn(w, std::min(n, w * chunk), std::min(n, (w + 1) * chunk));
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        try {
            fn(std::size_t{0}, std::size_t{0}, std::min(n, chunk));
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace kge
