#pragma once

#include <cstddef>
#include <functional>

namespace advmal {

/// Environment variable consulted when a worker count of 0 is requested.
inline constexpr const char* kWorkersEnvVar = "ADVMAL_WORKERS";

/// Resolves a requested worker count: 0 means "ADVMAL_WORKERS, else 1".
std::size_t resolve_workers(std::size_t requested);

/// Calls `body(i)` for every i in [0, n) on up to `workers` threads.
/// Each index is visited exactly once; callers write results by index, so
/// output order never depends on scheduling. The first exception thrown by
/// any body is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace advmal
