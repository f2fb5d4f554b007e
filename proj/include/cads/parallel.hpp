#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cads {

// Runs fn(i) for i in [0,n) across `workers` threads with a shared work
// queue. Each item owns its work end-to-end; an exception is captured as
// that item's error string instead of tearing the batch down.
template <typename Fn>
std::vector<std::optional<std::string>> parallel_for_each(std::size_t n, int workers, Fn&& fn) {
    std::vector<std::optional<std::string>> errors(n);
    if (n == 0) return errors;
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<std::size_t>(workers, n));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            } catch (...) {
                errors[i] = "unknown error";
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return errors;
}

}  // namespace cads
