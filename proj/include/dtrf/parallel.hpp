#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dtrf {

// Resolves worker count: explicit value > DTRF_THREADS env > hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DTRF_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Static contiguous partition of [0, n). fn(begin, end, chunk_index) — chunk order
// is fixed, so callers that reduce per-chunk results get deterministic sums.
inline void parallel_for(size_t n, int n_threads,
                         const std::function<void(size_t, size_t, int)>& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    fn(0, n, 0);
    return;
  }
  size_t chunks = std::min<size_t>(n_threads, n);
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  size_t base = n / chunks, rem = n % chunks, begin = 0;
  for (size_t c = 0; c < chunks; ++c) {
    size_t len = base + (c < rem ? 1 : 0);
    workers.emplace_back(fn, begin, begin + len, int(c));
    begin += len;
  }
  for (auto& w : workers) w.join();
}

}  // namespace dtrf
