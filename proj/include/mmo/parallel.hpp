#pragma once

#include <cstddef>
#include <functional>

namespace mmo {

/// Worker count: MMO_THREADS if set to a positive integer, else hardware concurrency.
std::size_t thread_budget();

/// Calls fn(i) for every i in [0, n). Indices are handed out dynamically, so
/// fn must write its result to a slot owned by i. The first exception thrown
/// by any call is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mmo
