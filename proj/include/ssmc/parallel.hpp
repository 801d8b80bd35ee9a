#pragma once

// Minimal blocking parallel_for over an index range. Work items must be
// independent; exceptions are captured per item and rethrown on the caller
// thread (first failing index wins).

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ssmc {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, unsigned num_threads, Fn&& fn) {
  const std::ptrdiff_t count = end - begin;
  if (count <= 0) return;
  const unsigned threads = std::min<std::ptrdiff_t>(resolve_threads(num_threads), count);
  if (threads <= 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<std::ptrdiff_t> next{begin};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::ptrdiff_t i = next.fetch_add(1); i < end; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next.store(end);  // drain remaining work
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ssmc
