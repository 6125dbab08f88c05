#pragma once

#include <cstddef>
#include <functional>

namespace homoglab {

/// Worker count used by assembly and sweeps. Defaults to the value of
/// HOMOGLAB_THREADS, else 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over `chunks` contiguous ranges of [0, n). The
/// partition depends only on n and the chunk count, never on scheduling,
/// so callers that merge per-chunk results in chunk order are deterministic.
void parallel_chunks(std::size_t n, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// Calls body(i) for i in [0, n) on up to thread_count() workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace homoglab
