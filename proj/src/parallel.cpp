#include "relattr/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace relattr {

int worker_count() {
    if (const char* env = std::getenv("RELATTR_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<std::int64_t>(worker_count(), n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};

    auto body = [&] {
        while (true) {
            const std::int64_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) threads.emplace_back(body);
    body();
    for (auto& t : threads) t.join();

    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace relattr
