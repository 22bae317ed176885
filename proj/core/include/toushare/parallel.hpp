#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace toushare {

// Deterministic data-parallel loop: the index range is split into contiguous
// chunks and workers write only to their own slots, so results do not depend
// on scheduling. Falls back to serial execution for small ranges.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t grain = 1024) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t max_chunks = (n + grain - 1) / grain;
  const std::size_t workers = std::min<std::size_t>(hw, max_chunks);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * step;
    const std::size_t hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace toushare
