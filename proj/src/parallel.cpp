#include "xtl/parallel.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace xtl {

std::size_t worker_threads() {
  static const std::size_t n = [] {
    const char* env = std::getenv("XTL_THREADS");
    if (env != nullptr) {
      const long v = std::strtol(env, nullptr, 10);
      if (v <= 1) return std::size_t{1};
      return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? std::size_t{1} : static_cast<std::size_t>(hw);
  }();
  return n;
}

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(count, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace xtl
