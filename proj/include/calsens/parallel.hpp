#pragma once

#include <cstddef>
#include <functional>

namespace calsens {

// Worker cap shared by bootstrap and simulation loops (0: hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n). Each index is handled exactly once; results must
// be written to index-owned slots so the outcome does not depend on scheduling.
// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace calsens
