#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>

#include <omp.h>

namespace auscnmf {

/// Thread budget for a kernel. threads == 1 is the sequential mode.
///
/// Work is always split into fixed-size blocks whose boundaries do not depend
/// on the thread count, and reductions combine per-block partials in block
/// order, so results are bit-identical for every thread count.
struct Parallelism {
  int threads = 1;
};

/// Runs fn(begin, end, block_index) over [0, n) in blocks of `block` items.
template <typename Fn>
void for_each_block(std::ptrdiff_t n, std::ptrdiff_t block, Parallelism par, Fn&& fn) {
  if (n <= 0) return;
  block = std::max<std::ptrdiff_t>(block, 1);
  const std::ptrdiff_t blocks = (n + block - 1) / block;
  const int threads = static_cast<int>(std::clamp<std::ptrdiff_t>(par.threads, 1, blocks));
  if (threads == 1) {
    for (std::ptrdiff_t b = 0; b < blocks; ++b) fn(b * block, std::min(n, (b + 1) * block), b);
    return;
  }
  // Exceptions must not escape an OpenMP region; the first one is rethrown here.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    try {
      fn(b * block, std::min(n, (b + 1) * block), b);
    } catch (...) {
#pragma omp critical(auscnmf_block_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::ptrdiff_t block_count(std::ptrdiff_t n, std::ptrdiff_t block) {
  return n <= 0 ? 0 : (n + block - 1) / block;
}

}  // namespace auscnmf
