#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace zigzag {

// Runs independent tasks over a fixed worker count. Tasks write into
// preallocated slots, so results are deterministic regardless of
// scheduling. The first exception is rethrown after all workers join.
inline void run_parallel(std::vector<std::function<void()>>& tasks, int workers) {
  if (workers <= 1) {
    for (auto& task : tasks) task();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const auto n_threads = static_cast<std::size_t>(workers) < tasks.size()
                             ? static_cast<std::size_t>(workers)
                             : tasks.size();
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= tasks.size()) return;
        try {
          tasks[k]();
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace zigzag
