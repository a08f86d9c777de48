#pragma once

#include <cstddef>
#include <functional>

namespace xtl {

/// Worker-thread budget. Reads XTL_THREADS once; 0 or 1 means sequential,
/// unset falls back to the hardware concurrency.
std::size_t worker_threads();

/// Runs body(begin, end) over a partition of [0, count) on up to
/// worker_threads() threads. Callers are responsible for making the ranges
/// independent; results must not depend on the partition.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace xtl
