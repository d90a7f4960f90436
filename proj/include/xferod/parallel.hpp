#pragma once

#include <cstddef>
#include <functional>

namespace xferod {

/// Worker count for internal loops: hardware concurrency, capped by the
/// XFER_OD_THREADS environment variable when it holds a positive integer.
std::size_t worker_count();

/// Runs body(i) for i in [0, count). Each index is visited exactly once, so
/// bodies that only write slot i produce schedule-independent results. The
/// first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace xferod
