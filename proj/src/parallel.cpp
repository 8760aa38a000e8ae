#include "qmxw/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace qmxw {

double pairwise_sum(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::size_t n = v.size();
    while (n > 1) {
        std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) v[i] += v[i + half];
        n = half;
    }
    return v[0];
}

void Workers::parallel_blocks(std::size_t n,
                              const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) const {
    if (n == 0) return;
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    auto run_block = [&](std::size_t b) {
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        fn(b, lo, hi);
    };
    if (count_ == 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b) run_block(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nblocks) return;
            run_block(b);
        }
    };
    std::vector<std::thread> threads;
    const int nt = std::min<std::size_t>(count_, nblocks);
    threads.reserve(nt - 1);
    for (int t = 1; t < nt; ++t) threads.emplace_back(worker);
    worker();
    for (auto& th : threads) th.join();
}

double Workers::reduce_sum(std::size_t n, const std::function<double(std::size_t)>& fn) const {
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partials(nblocks, 0.0);
    parallel_blocks(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += fn(i);
        partials[b] = s;
    });
    return pairwise_sum(partials);
}

double Workers::reduce_max(std::size_t n, const std::function<double(std::size_t)>& fn) const {
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partials(nblocks, 0.0);
    parallel_blocks(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double m = fn(lo);
        for (std::size_t i = lo + 1; i < hi; ++i) m = std::max(m, fn(i));
        partials[b] = m;
    });
    double m = partials[0];
    for (double p : partials) m = std::max(m, p);
    return m;
}

void Workers::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const {
    parallel_blocks(n, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace qmxw
