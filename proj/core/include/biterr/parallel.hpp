#pragma once

#include <cstddef>
#include <functional>

// Deterministic data parallelism. parallel_for partitions [begin, end) into
// disjoint contiguous chunks; every index is processed by exactly one worker
// and nothing is reduced across workers, so results are bit-identical for
// any thread count. The BITERR_THREADS environment variable caps the pool.

namespace biterr::par {

// Effective thread cap: min(hardware, BITERR_THREADS if set). At least 1.
int max_threads();

// Override the cap programmatically (tests use this). 0 restores the default.
void set_max_threads(int n);

// Invokes fn(i) for every i in [begin, end), split across up to max_threads()
// workers. fn must only write state owned by index i.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

// Chunked variant: fn(chunk_begin, chunk_end) over disjoint ranges.
void parallel_for_chunks(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace biterr::par
