#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rankrl {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// OpenMP-backed parallel loop over [0, n). The functor must only write to
// per-index slots; combine results afterwards in index order so the outcome
// is independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

// Serial twin of parallel_for, kept so tests and the benchmark can compare
// the two paths on identical inputs.
template <typename Fn>
void serial_for(std::size_t n, const Fn& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

// Deterministic sum reduction: the batch is cut into fixed-size blocks
// (independent of thread count), each block accumulates serially into its
// own buffer, and blocks are merged in order. `accumulate(block_buf, i)`
// adds item i into block_buf.
template <typename Acc>
void blocked_reduce(std::size_t n, std::size_t block, std::vector<double>& out,
                    const Acc& accumulate) {
  if (block == 0) block = 1;
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<std::vector<double>> bufs(n_blocks,
                                        std::vector<double>(out.size(), 0.0));
  parallel_for(n_blocks, [&](std::size_t b) {
    const std::size_t lo = b * block;
    const std::size_t hi = std::min(n, lo + block);
    for (std::size_t i = lo; i < hi; ++i) accumulate(bufs[b], i);
  });
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += bufs[b][j];
  }
}

}  // namespace rankrl
