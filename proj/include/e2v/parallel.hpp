#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace e2v {

/// Runs fn(i) for i in [0, n) on at most `concurrency` threads. Callers write
/// results into pre-sized slots, so output order never depends on timing.
/// The exception of the lowest failing index is rethrown after all workers join.
template <typename F>
void parallel_for(std::size_t n, std::size_t concurrency, F&& fn) {
  if (n == 0) return;
  concurrency = std::clamp<std::size_t>(concurrency, 1, n);
  if (concurrency == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  workers.reserve(concurrency);
  for (std::size_t w = 0; w < concurrency; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace e2v
