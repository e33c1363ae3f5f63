// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace sdfreg {

/// @brief Runs fn(i) for i in [0, count) across `workers` threads.
///
/// Work is split into contiguous index ranges, so every index is processed
/// exactly once and results written to per-index slots are identical for any
/// worker count. Exceptions from workers are rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  if (workers <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(n_threads);
  threads.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    const std::size_t begin = count * w / n_threads;
    const std::size_t end = count * (w + 1) / n_threads;
    threads.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sdfreg
