#ifndef QMXW_PARALLEL_HPP
#define QMXW_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace qmxw {

/// Work-sharing context. All reductions go through a fixed-topology pairwise
/// tree over fixed-size blocks, so results are bit-identical for any worker
/// count. Worker count 1 runs inline without spawning threads.
class Workers {
public:
    explicit Workers(int count = 1) : count_(count < 1 ? 1 : count) {}

    int count() const { return count_; }

    /// Invokes fn(begin, end) on chunk boundaries that depend only on n,
    /// never on the worker count. Chunks are the reduction blocks.
    void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) const;

    /// Deterministic sum of fn(i) over i in [0, n): per-block serial sums in
    /// index order, then a pairwise fold of the block partials.
    double reduce_sum(std::size_t n, const std::function<double(std::size_t)>& fn) const;

    /// Deterministic max of fn(i) over i in [0, n).
    double reduce_max(std::size_t n, const std::function<double(std::size_t)>& fn) const;

    /// Plain parallel loop: fn(i) for i in [0, n). Each index is written by
    /// exactly one worker; no reduction involved.
    void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const;

    static constexpr std::size_t kBlock = 2048;

private:
    int count_;
};

/// Pairwise fold of a partials vector in fixed order.
double pairwise_sum(std::vector<double>& partials);

}  // namespace qmxw

#endif
