#pragma once

#include <cstddef>
#include <functional>

namespace sedtomo {

/// Number of hardware threads, at least 1.
int default_workers();

/// Resolves a user worker count: values < 1 mean default_workers().
int resolve_workers(int requested);

/// Splits [0, n) into contiguous blocks, one per worker, and runs fn(begin, end, worker)
/// on each. The partition depends only on n and the worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t, int)>& fn);

}  // namespace sedtomo
