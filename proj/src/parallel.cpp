#include "dhrn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dhrn {

namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_thread_count(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }

std::size_t thread_count() { return g_threads; }

void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_count(), n_tasks);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n_tasks; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t k = next++; k < n_tasks; k = next++) {
            try {
                fn(k);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace dhrn
