#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace affectlens {

/// Worker count: explicit request, else AFFECTLENS_THREADS, else hardware.
inline std::size_t resolve_thread_count(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("AFFECTLENS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n). Each index writes only its own output slot, so
// results never depend on scheduling. The exception from the lowest failing
// index is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::min(std::max<std::size_t>(threads, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace affectlens
