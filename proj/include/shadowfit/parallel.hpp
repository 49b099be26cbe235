#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace shadowfit {

inline unsigned worker_count() {
  if (const char* env = std::getenv("SHADOWFIT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

namespace detail {
// Nested parallel regions run serially inside the worker that spawned them.
inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks, one per
// worker; results must be written to preallocated per-index slots so the
// outcome does not depend on scheduling. The first exception thrown by any
// worker is rethrown on the calling thread.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned max_threads = 0) {
  if (n == 0) return;
  unsigned nt = max_threads ? std::min(max_threads, worker_count()) : worker_count();
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, n));
  if (nt <= 1 || detail::in_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (unsigned t = 0; t < nt; ++t) {
    const std::size_t lo = static_cast<std::size_t>(t) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi]() {
      detail::in_parallel_region() = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Block variant: fn(lo, hi) handles a contiguous index range, which lets the
// caller hoist per-worker scratch buffers out of the element loop.
inline void parallel_for_blocks(std::size_t n,
                                const std::function<void(std::size_t, std::size_t)>& fn,
                                unsigned max_threads = 0) {
  if (n == 0) return;
  unsigned nt = max_threads ? std::min(max_threads, worker_count()) : worker_count();
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, n));
  if (nt <= 1 || detail::in_parallel_region()) {
    fn(0, n);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (unsigned t = 0; t < nt; ++t) {
    const std::size_t lo = static_cast<std::size_t>(t) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi]() {
      detail::in_parallel_region() = true;
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace shadowfit
