#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace demix {

// Worker count: DEMIX_THREADS caps it, hardware concurrency is the default.
inline int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("DEMIX_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return n;
}

// Work-queue parallel for: fn(i) for i in [0, n). Callers write results into
// pre-sized slots keyed by i, which keeps aggregation independent of
// scheduling order.
template <class F>
inline void parallel_for(int n, F&& fn, int threads = 0) {
  if (n <= 0) return;
  int nt = threads > 0 ? threads : thread_budget();
  nt = std::min(nt, n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace demix
