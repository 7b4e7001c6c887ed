#include "esrf/parallel.hpp"

#include "esrf/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace esrf {

int resolve_workers(std::optional<int> requested) {
    if (requested) {
        if (*requested < 1) {
            throw ConfigError("worker count must be positive");
        }
        return *requested;
    }
    if (const char* env = std::getenv("ESRF_WORKERS"); env != nullptr && *env != '\0') {
        int value = 0;
        const char* end = env + std::strlen(env);
        auto [ptr, ec] = std::from_chars(env, end, value);
        if (ec != std::errc() || ptr != end || value < 1) {
            throw ConfigError(std::string("ESRF_WORKERS must be a positive integer, got '") + env + "'");
        }
        return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto drain = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
    if (threads == 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads - 1);
        for (std::size_t t = 1; t < threads; ++t) {
            pool.emplace_back(drain);
        }
        drain();
        for (auto& th : pool) {
            th.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace esrf
