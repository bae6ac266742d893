#pragma once

#include <cstddef>
#include <functional>

namespace qf {

/// Runs body(0..n-1) on up to `threads` workers. Work items write to their
/// own result slots, so the outcome does not depend on scheduling. If any
/// item throws, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace qf
