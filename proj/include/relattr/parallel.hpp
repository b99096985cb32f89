#pragma once

#include <cstdint>
#include <functional>

namespace relattr {

/// Worker count: RELATTR_THREADS if set (clamped to >= 1), else hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, n). Each index writes only its own slots, so the
/// result is identical for any worker count. Exceptions are rethrown on the
/// calling thread.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace relattr
