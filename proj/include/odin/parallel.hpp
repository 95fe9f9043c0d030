#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace odin {

/// Default worker count: ODIN_THREADS if set, else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("ODIN_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(k) for k in [0, count). Work items are independent and each
/// writes only its own output slot, so the result never depends on how many
/// threads ran them.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = std::min<std::size_t>(count, threads < 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += workers) fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Fixed-size blocks over [0, n); block boundaries never depend on threads.
struct BlockRange {
  std::size_t begin;
  std::size_t size;
};

inline std::vector<BlockRange> fixed_blocks(std::size_t n, std::size_t block) {
  std::vector<BlockRange> out;
  for (std::size_t b = 0; b < n; b += block) out.push_back({b, std::min(block, n - b)});
  return out;
}

}  // namespace odin
