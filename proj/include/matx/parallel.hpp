#pragma once

#include <cstdint>
#include <functional>

namespace matx {

// Worker count for internal data parallelism. Read once from MATX_THREADS
// (default 1); set_thread_count overrides it.
int thread_count();
void set_thread_count(int threads);

// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are fixed by
// n and the thread count, and callers only write disjoint outputs per index,
// so results do not depend on scheduling.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace matx
