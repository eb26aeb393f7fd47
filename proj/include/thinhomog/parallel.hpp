#pragma once
// Minimal fork-join helper. Work items are claimed through an atomic counter;
// the first exception thrown by any item is rethrown on the calling thread.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace thinhomog {

/// Worker count: THINHOMOG_WORKERS if set and positive, else `fallback`
/// (0 means hardware concurrency).
inline int resolve_workers(int fallback = 0) {
  if (const char* env = std::getenv("THINHOMOG_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  if (fallback > 0) return fallback;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t t = 0; t + 1 < w; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

} // namespace thinhomog
