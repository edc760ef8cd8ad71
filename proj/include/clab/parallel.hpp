#pragma once

/**
 * Deterministic fork-join helper. Work items write only to their own output
 * slot; any cross-item reduction must happen afterwards in a fixed order, so
 * results never depend on the worker count.
 */

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace clab {

template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  size_t w = workers < 1 ? 1 : static_cast<size_t>(workers);
  w = std::min(w, n);
  if (w == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  size_t block = (n + w - 1) / w;
  for (size_t t = 0; t < w; ++t) {
    size_t lo = t * block;
    size_t hi = std::min(n, lo + block);
    threads.emplace_back([&, t, lo, hi] {
      try {
        for (size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace clab
