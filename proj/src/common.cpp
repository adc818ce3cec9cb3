#include "sflr/common.hpp"

#include <atomic>
#include <mutex>

namespace sflr {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
    int n = g_max_threads.load();
    if (n == 0) {
        unsigned hc = std::thread::hardware_concurrency();
        n = hc == 0 ? 1 : static_cast<int>(hc);
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    break;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sflr
