#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fairgrade {

// Runs fn(i) for i in [0, n). Each index must write only to its own output
// slot; results are then independent of the worker count and chunking.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t num_threads = std::min<size_t>(static_cast<size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(num_threads);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (size_t t = 0; t < num_threads; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (size_t i = t; i < n; i += num_threads) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace fairgrade
