#pragma once

#include <cstddef>
#include <functional>

namespace hrank {

/// Worker cap: HARMONIC_RANK_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are handed
/// out in order; results must not depend on which thread ran them. The first
/// exception thrown by a body is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace hrank
