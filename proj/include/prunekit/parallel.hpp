#pragma once

#include <cstddef>
#include <functional>

namespace prunekit {

// Worker count resolved from the PRUNEKIT_THREADS environment variable;
// unset, empty or 0 means all hardware threads.
unsigned thread_count();

// Runs fn(begin, end) over contiguous shards of [0, n). Sharding never
// changes results: callers only write per-index state, so any split yields
// bit-identical output. Small inputs run inline on the calling thread.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t, size_t)>& fn);

}  // namespace prunekit
