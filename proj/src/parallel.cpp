#include "prunekit/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prunekit {

unsigned thread_count() {
    if (const char* env = std::getenv("PRUNEKIT_THREADS")) {
        char* end = nullptr;
        unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for(size_t n, unsigned threads, const std::function<void(size_t, size_t)>& fn) {
    constexpr size_t kMinGrain = 4096;
    if (n == 0) return;
    size_t shards = threads;
    if (shards > 1 && n / shards < kMinGrain) shards = std::max<size_t>(1, n / kMinGrain);
    if (shards <= 1) {
        fn(0, n);
        return;
    }

    std::vector<std::thread> workers;
    workers.reserve(shards - 1);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    size_t chunk = (n + shards - 1) / shards;

    auto run = [&](size_t begin, size_t end) {
        try {
            fn(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };

    for (size_t s = 1; s < shards; ++s) {
        size_t begin = s * chunk;
        if (begin >= n) break;
        workers.emplace_back(run, begin, std::min(n, begin + chunk));
    }
    run(0, std::min(n, chunk));
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace prunekit
