#pragma once

#include <cstddef>
#include <functional>

namespace discourse {

// Runs fn(i) for i in [0, count) on a small thread pool. Callers must write
// results into disjoint slots; output order is then independent of scheduling.
// threads == 0 picks hardware concurrency. Exceptions are captured and the
// first one (lowest index) is rethrown after all workers join.
void parallel_for(size_t count, const std::function<void(size_t)>& fn, unsigned threads = 0);

}  // namespace discourse
