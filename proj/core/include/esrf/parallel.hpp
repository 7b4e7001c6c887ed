#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace esrf {

/// Worker count: explicit request, else the ESRF_WORKERS environment variable,
/// else std::thread::hardware_concurrency(). Always at least 1.
/// Throws ConfigError when ESRF_WORKERS is set but not a positive integer.
int resolve_workers(std::optional<int> requested = std::nullopt);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Each index runs on
/// exactly one thread, so results written to slot i do not depend on the
/// schedule. If calls throw, the exception of the lowest index is rethrown
/// after all threads have joined.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace esrf
