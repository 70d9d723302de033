#include "sedtomo/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace sedtomo {

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_workers(int requested) { return requested < 1 ? default_workers() : requested; }

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t, int)>& fn) {
  if (n == 0) return;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(resolve_workers(workers)), n);
  if (w == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = n * k / w;
    const std::size_t end = n * (k + 1) / w;
    pool.emplace_back([&, begin, end, k] {
      try {
        fn(begin, end, static_cast<int>(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sedtomo
