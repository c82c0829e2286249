#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

// Deterministic parallel helpers.  Work is split into fixed-size chunks that
// do not depend on the worker count; each chunk is processed sequentially and
// chunk results are merged in chunk order.  Combined with per-item RNG streams
// this makes every output byte independent of how many threads ran.
namespace thermeq::parallel {

inline unsigned resolve_workers(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Calls fn(i) exactly once for each i in [0, count), from `workers` threads.
// fn must only touch state owned by item i (e.g. a preallocated slot).
inline void parallel_for(std::size_t count, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
    workers = resolve_workers(workers);
    if (count == 0) return;
    if (workers <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::exception_ptr first_error;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= count || first_error) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Reduction over `count` items with accumulators of type Acc.  Items are
// grouped into fixed chunks of `chunk` items; each chunk accumulates
// sequentially into its own Acc (PerItem: void(Acc&, std::size_t i)), and
// chunks merge in index order (Acc::merge).  The result is bit-identical for
// any worker count.
template <class Acc, class PerItem>
Acc chunked_reduce(std::size_t count, std::size_t chunk, unsigned workers, PerItem per_item) {
    if (chunk == 0) chunk = 1;
    const std::size_t n_chunks = count == 0 ? 0 : (count - 1) / chunk + 1;
    std::vector<Acc> parts(n_chunks);
    parallel_for(n_chunks, workers, [&](std::size_t ci) {
        const std::size_t lo = ci * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) per_item(parts[ci], i);
    });
    Acc total{};
    for (auto& part : parts) total.merge(part);
    return total;
}

}  // namespace thermeq::parallel
