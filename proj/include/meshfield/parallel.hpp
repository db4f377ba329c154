#pragma once

#include <cstdint>
#include <functional>

namespace meshfield {

// Worker cap: MESHFIELD_THREADS if set (clamped to >= 1), else hardware concurrency.
int max_workers();

// Runs body(i) for i in [0, n). Work items are claimed through an atomic
// counter, so bodies must write only to per-index state; determinism of the
// overall result is then independent of scheduling.
void parallel_for(int64_t n, const std::function<void(int64_t)>& body);

}  // namespace meshfield
