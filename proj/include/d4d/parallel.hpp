#pragma once

#include <cstddef>
#include <functional>

namespace d4d {

// Worker cap for intra-stage parallelism. 0 means "use D4D_THREADS or the
// hardware concurrency".
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into pre-sized slots so output order never depends on
// scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace d4d
