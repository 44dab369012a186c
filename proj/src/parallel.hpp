#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace lrbp::detail {

// Runs fn(index, worker) for index in [0, count) over contiguous chunks.
// Each index is handled by exactly one worker; the first exception thrown
// by any worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers <= 1) {
        for (int k = 0; k < count; ++k) fn(k, 0);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const int begin = w * chunk;
            const int end = std::min(count, begin + chunk);
            try {
                for (int k = begin; k < end; ++k) fn(k, w);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace lrbp::detail
