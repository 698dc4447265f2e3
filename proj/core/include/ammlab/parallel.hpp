#pragma once

#include <cstddef>
#include <functional>

namespace ammlab {

/// Resolves a requested worker count: 0 means "all hardware threads".
unsigned resolve_workers(unsigned requested);

/// Runs body(i) for i in [0, count) on up to `workers` threads.
///
/// Indices are handed out dynamically, so body must only write to slots
/// owned by its index; that keeps results independent of scheduling. The
/// first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace ammlab
