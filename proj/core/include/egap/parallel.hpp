#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace egap {

/// Worker count from the EGAP_WORKERS environment variable (default 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, count) over contiguous chunks. Callers write into
/// per-index slots and reduce in index order, so results do not depend on the
/// number of workers.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace egap
