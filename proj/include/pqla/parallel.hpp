#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pqla {

/// Runs fn(i) for i in [0, n) on `jobs` threads (worker w takes i = w, w + jobs, ...).
/// If any call throws, the exception of the lowest failing index is rethrown
/// after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs == 0 ? 1 : jobs, n));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, n);
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        error_index[w] = i;
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  std::size_t first = n, which = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w] && error_index[w] < first) {
      first = error_index[w];
      which = w;
    }
  }
  if (first < n) std::rethrow_exception(errors[which]);
}

}  // namespace pqla
