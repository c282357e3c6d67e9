#pragma once

#include <cstdint>
#include <functional>

namespace ecgdg {

// Worker cap: min(hardware_concurrency, ECGDG_THREADS). set_max_threads(1)
// forces serial execution (the --deterministic path; note that parallel_for
// partitions disjoint output ranges, so results are identical either way —
// the serial mode exists to honor the flag, not to change numerics).
int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end) over disjoint contiguous chunks of [0, n). Each chunk
// is processed serially by one worker; no two chunks overlap, so writes to
// per-index outputs never race and reduction order within an output element
// never changes.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace ecgdg
