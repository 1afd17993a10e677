// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0

#ifndef ROADREG_CORE_PARALLEL_HPP
#define ROADREG_CORE_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace roadreg {

/// Worker count after applying the ROADREG_WORKERS override; 0 means one per
/// hardware thread.
[[nodiscard]] inline int resolve_workers(int configured) {
  if (const char* env = std::getenv("ROADREG_WORKERS")) {
    try {
      configured = std::stoi(env);
    } catch (const std::exception&) {
    }
  }
  if (configured <= 0) {
    configured = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  return configured;
}

/// Calls fn(begin, end) on contiguous chunks of [0, n). Chunk boundaries depend
/// only on n and the worker count; callers writing to disjoint outputs get
/// schedule-independent results.
template <typename Fn>
void parallel_for_chunks(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n);
  if (w == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  threads.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = k * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, k, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  parallel_for_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace roadreg

#endif  // ROADREG_CORE_PARALLEL_HPP
