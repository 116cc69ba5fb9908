#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace sppb {

/// Process-wide worker cap used by parallel_for. 1 by default; the CLI's
/// --threads flag raises it. Outputs never depend on this value: parallel
/// loops write to preassigned slots and aggregate sequentially.
int max_threads();
void set_max_threads(int n);

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks, one
/// per worker; fn must write only to slots owned by iteration i.
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([&fn, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sppb
