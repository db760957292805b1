#pragma once

#include <cstddef>
#include <functional>

namespace fabtwin {

/// Worker cap: FABTWIN_THREADS when set and positive, else hardware
/// concurrency. 0 means auto.
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// is processed exactly once; callers write results to disjoint slots so the
/// outcome is independent of scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fabtwin
