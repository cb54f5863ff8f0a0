#pragma once

#include <cstddef>
#include <functional>

namespace stresskit {

/// Worker cap: hardware concurrency, lowered by STRESSKIT_THREADS when set.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index is handled exactly once; callers write
/// results into per-index slots so output never depends on scheduling. Calls made
/// from inside a worker run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace stresskit
