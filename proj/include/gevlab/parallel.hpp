#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace gevlab {

// Worker count for chunked loops. Results never depend on it: work is cut
// into fixed-size chunks keyed by chunk index and merged in index order.
inline int& thread_count_ref() {
    static int n = [] {
        if (const char* env = std::getenv("GEVLAB_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        return 1;
    }();
    return n;
}

inline void set_threads(int n) { thread_count_ref() = std::max(1, n); }
inline int get_threads() { return thread_count_ref(); }

// Evaluates body(i) for i in [0, count) and merges per-chunk accumulators
// in chunk order. Acc must be default-constructible; merge(acc, other)
// folds right into left.
template <typename Acc, typename Body, typename Merge>
Acc chunked_reduce(std::size_t count, std::size_t chunk_size, Body body, Merge merge) {
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
    std::vector<Acc> partial(nchunks);
    const int workers = std::min<std::size_t>(std::max(1, get_threads()), std::max<std::size_t>(nchunks, 1));
    if (workers <= 1 || nchunks <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) {
            const std::size_t lo = c * chunk_size;
            const std::size_t hi = std::min(count, lo + chunk_size);
            for (std::size_t i = lo; i < hi; ++i) body(partial[c], i);
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t c = static_cast<std::size_t>(w); c < nchunks;
                     c += static_cast<std::size_t>(workers)) {
                    const std::size_t lo = c * chunk_size;
                    const std::size_t hi = std::min(count, lo + chunk_size);
                    for (std::size_t i = lo; i < hi; ++i) body(partial[c], i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    Acc out{};
    for (std::size_t c = 0; c < nchunks; ++c) merge(out, partial[c]);
    return out;
}

} // namespace gevlab
