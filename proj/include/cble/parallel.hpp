#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace cble {

// Neumaier compensated summation. Reductions over per-path values are run in
// a fixed order, so estimator outputs do not depend on the thread count.
struct Neumaier {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

inline double compensated_sum(const std::vector<double>& v) {
    Neumaier acc;
    for (double x : v) acc.add(x);
    return acc.value();
}

// Runs body(i) for i in [0, n) on up to `threads` workers. Work is handed out
// in fixed-size chunks through an atomic cursor; bodies must only write to
// their own slots.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    constexpr std::size_t chunk = 256;
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t begin = cursor.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = begin + chunk < n ? begin + chunk : n;
            for (std::size_t i = begin; i < end; ++i) body(i);
        }
    };
    std::vector<std::thread> pool;
    const int nw = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), n));
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace cble
