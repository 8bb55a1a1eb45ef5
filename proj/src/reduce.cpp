#include "mkvlab/reduce.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mkv {

namespace {

constexpr std::size_t kLeaf = 8;
constexpr std::size_t kBlock = 4096;

double tree(const double* v, std::size_t n) {
  if (n <= kLeaf) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return tree(v, half) + tree(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= kBlock) return tree(v.data(), v.size());
  const std::size_t blocks = (v.size() + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlock;
    partial[b] = tree(v.data() + lo, std::min(kBlock, v.size() - lo));
  }
  return tree(partial.data(), partial.size());
}

double parallel_pairwise_sum(std::span<const double> v, int threads) {
  if (v.size() <= kBlock || threads <= 1) return pairwise_sum(v);
  const std::size_t blocks = (v.size() + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks);
  const long nb = static_cast<long>(blocks);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (long b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    partial[static_cast<std::size_t>(b)] = tree(v.data() + lo, std::min(kBlock, v.size() - lo));
  }
  return tree(partial.data(), partial.size());
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MKVLAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace mkv
