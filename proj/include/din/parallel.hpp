#pragma once

#include <cstddef>
#include <functional>

namespace din {

/// Worker count for intra-run parallelism: DIN_THREADS if set (>= 1),
/// otherwise the hardware concurrency.
int worker_count();

/// Runs fn(0) .. fn(n - 1) concurrently and joins. Worker 0 runs on the
/// calling thread. Exceptions from any worker are rethrown (lowest index first).
void run_workers(int n, const std::function<void(int)>& fn);

/// Half-open slice [begin, end) of `total` items owned by `worker` of `workers`.
struct Slice {
  std::size_t begin = 0;
  std::size_t end = 0;
};
Slice worker_slice(std::size_t total, int worker, int workers);

}  // namespace din
