#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace noarb {

// Seed of the independent stream for work item `index` (splitmix64 finalizer
// over the pair), so results do not depend on evaluation order.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using PathEngine = std::mt19937_64;

inline PathEngine path_engine(std::uint64_t seed, std::uint64_t index) {
    return PathEngine(substream_seed(seed, index));
}

// Uniform in (0, 1): never returns 0, so log() is safe.
inline double open_uniform(PathEngine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

// Fixed-shape pairwise summation; the result depends only on the values.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) over contiguous chunks. fn must only write to
// slots owned by index i.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([lo, hi, &fn, &err = errors[t]] {
                try {
                    for (std::size_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    err = std::current_exception();
                }
            });
        }
    }
    // Rethrow the error of the lowest chunk so the outcome does not depend on timing.
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};

inline SampleStats sample_stats(std::span<const double> x) {
    SampleStats s;
    if (x.empty()) return s;
    const auto n = static_cast<double>(x.size());
    s.mean = pairwise_sum(x) / n;
    if (x.size() < 2) return s;
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - s.mean) * (x[i] - s.mean);
    s.std_error = std::sqrt(pairwise_sum(dev) / (n - 1.0) / n);
    return s;
}

} // namespace noarb
