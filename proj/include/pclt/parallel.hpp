#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <future>
#include <thread>
#include <vector>

namespace pclt {

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Splits [0, count) into at most `workers` contiguous chunks and runs
/// fn(begin, end) on each, one thread per chunk. The first exception thrown
/// by any chunk is rethrown after all chunks finish.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t workers, Fn&& fn) {
  if (count == 0) return;
  workers = std::min(resolve_workers(workers), count);
  if (workers == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::future<void>> jobs;
  jobs.reserve(workers);
  const std::size_t base = count / workers, extra = count % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t end = begin + base + (w < extra ? 1 : 0);
    jobs.push_back(std::async(std::launch::async, [&fn, begin, end] { fn(begin, end); }));
    begin = end;
  }
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      j.get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace pclt
