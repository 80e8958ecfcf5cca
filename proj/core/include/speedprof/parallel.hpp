#pragma once

#include <cstddef>
#include <functional>

namespace speedprof {

/// Worker count: `requested` if positive, else hardware concurrency; capped
/// by the SPEEDPROF_THREADS environment variable when set.
std::size_t worker_count(std::size_t requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception by index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace speedprof
