#pragma once

#include <cstddef>
#include <span>

namespace mkv {

/// Pairwise sum with a fixed tree shape that depends only on the length of
/// the input. Results are bit-identical for any worker count.
double pairwise_sum(std::span<const double> v);

/// Same tree shape as pairwise_sum, leaf blocks evaluated in parallel.
double parallel_pairwise_sum(std::span<const double> v, int threads);

/// Resolve a worker count: positive values pass through, 0 means
/// MKVLAB_THREADS if set, else the hardware concurrency.
int resolve_threads(int requested);

}  // namespace mkv
