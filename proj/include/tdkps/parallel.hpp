#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tdkps {

/// Runs body(worker, i) for i in [0, count) on up to `workers` threads.
/// Work is claimed dynamically, so callers must write results by index.
/// The first exception thrown by any task is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  const auto n_threads = static_cast<std::size_t>(
      std::clamp<long long>(workers, 1, static_cast<long long>(std::max<std::size_t>(count, 1))));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(std::size_t{0}, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](std::size_t worker) {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(worker, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (std::size_t w = 1; w < n_threads; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tdkps
