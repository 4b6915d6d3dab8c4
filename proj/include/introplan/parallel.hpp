#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace introplan {

// Applies fn(item, index) over `items` with at most `in_flight` concurrent
// calls, committing results in input order. With in_flight <= 1 everything
// runs inline on the caller's thread. The first exception wins and is
// rethrown after all workers drain.
template <typename T, typename F>
auto parallel_map(const std::vector<T>& items, F&& fn, std::size_t in_flight)
    -> std::vector<decltype(fn(items.front(), std::size_t{0}))> {
    using R = decltype(fn(items.front(), std::size_t{0}));
    std::vector<std::optional<R>> slots(items.size());

    if (in_flight <= 1 || items.size() <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) slots[i] = fn(items[i], i);
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::exception_ptr first_error;
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= items.size()) return;
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (first_error) return;
                }
                try {
                    slots[i] = fn(items[i], i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> workers;
        std::size_t count = std::min(in_flight, items.size());
        workers.reserve(count);
        for (std::size_t i = 0; i < count; ++i) workers.emplace_back(worker);
        for (auto& w : workers) w.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    std::vector<R> results;
    results.reserve(items.size());
    for (auto& slot : slots) results.push_back(std::move(*slot));
    return results;
}

}  // namespace introplan
